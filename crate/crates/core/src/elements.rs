//! BSWI rod and Timoshenko beam elements, meshing and global assembly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisTable;
use crate::crack::{spring_coupling, CrackSpec};
use crate::{Error, Result};

/// Nodes per BSWI4,3 element.
pub const NODES_PER_ELEMENT: usize = 11;

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) {
            return Err(Error::Parameter(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(density > 0.0) {
            return Err(Error::Parameter(format!("density must be positive, got {density}")));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(Error::Parameter(format!(
                "Poisson's ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            density,
        })
    }

    /// Aluminum: 70 GPa, ν = 0.3, 2730 kg/m³.
    pub fn aluminum() -> Self {
        Self::new(70e9, 0.3, 2730.0).expect("valid preset")
    }

    /// Steel: 200 GPa, ν = 0.3, 7800 kg/m³.
    pub fn steel() -> Self {
        Self::new(200e9, 0.3, 7800.0).expect("valid preset")
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    /// Bar velocity `sqrt(E / ρ)`.
    pub fn bar_velocity(&self) -> f64 {
        (self.youngs_modulus / self.density).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionShape {
    Circular { diameter: f64 },
    Rectangular { width: f64, height: f64 },
}

/// Cross-section properties. `shear_factor` divides `GA` (so it is the
/// reciprocal of the usual Timoshenko κ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub shape: SectionShape,
    pub area: f64,
    pub inertia: f64,
    pub shear_factor: f64,
}

impl Section {
    pub fn circular(diameter: f64) -> Result<Self> {
        if !(diameter > 0.0) {
            return Err(Error::Parameter(format!("diameter must be positive, got {diameter}")));
        }
        Ok(Self {
            shape: SectionShape::Circular { diameter },
            area: PI * diameter * diameter / 4.0,
            inertia: PI * diameter.powi(4) / 64.0,
            shear_factor: 1.11,
        })
    }

    pub fn rectangular(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Parameter(format!(
                "section width and height must be positive, got {width} x {height}"
            )));
        }
        Ok(Self {
            shape: SectionShape::Rectangular { width, height },
            area: width * height,
            inertia: width * height.powi(3) / 12.0,
            shear_factor: 10.0 / 9.0,
        })
    }

    pub fn from_shape(shape: SectionShape) -> Result<Self> {
        match shape {
            SectionShape::Circular { diameter } => Self::circular(diameter),
            SectionShape::Rectangular { width, height } => Self::rectangular(width, height),
        }
    }

    pub fn with_shear_factor(mut self, shear_factor: f64) -> Result<Self> {
        if !(shear_factor > 0.0) {
            return Err(Error::Parameter(format!(
                "shear factor must be positive, got {shear_factor}"
            )));
        }
        self.shear_factor = shear_factor;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Rod,
    Beam,
}

impl Structure {
    pub fn dofs_per_node(self) -> usize {
        match self {
            Structure::Rod => 1,
            Structure::Beam => 2,
        }
    }

    /// Field names of the nodal components, in DOF order.
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            Structure::Rod => &["u"],
            Structure::Beam => &["w", "theta"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    FreeFree,
    FixedFree,
    FixedFixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

pub fn rod_element(
    material: &Material,
    section: &Section,
    length: f64,
    table: &BasisTable,
) -> Result<ElementMatrices> {
    check_length(length)?;
    let rho_a = material.density * section.area;
    let ea = material.youngs_modulus * section.area;
    Ok(ElementMatrices {
        mass: table.nodal(&table.gamma0) * (rho_a * length),
        stiffness: table.nodal(&table.gamma1) * (ea / length),
    })
}

/// Timoshenko beam element with local ordering `[w₁..w₁₁ | θ₁..θ₁₁]`.
///
/// Shear strain is `γ = dw/dx − θ`, which fixes the sign of the coupling
/// block `K₂ = −(GA/k) Rᵀ ∫Φ'ᵀΦ dξ R`.
pub fn beam_element(
    material: &Material,
    section: &Section,
    length: f64,
    table: &BasisTable,
) -> Result<ElementMatrices> {
    check_length(length)?;
    let n = table.size();
    let ga_k = material.shear_modulus() * section.area / section.shear_factor;
    let ei = material.youngs_modulus * section.inertia;

    let g0 = table.nodal(&table.gamma0);
    let g1 = table.nodal(&table.gamma1);
    let g01 = table.nodal(&table.gamma01);

    let k1 = &g1 * (ga_k / length);
    let k2 = &g01 * (-ga_k);
    let k4 = &g1 * (ei / length) + &g0 * (ga_k * length);
    let m1 = &g0 * (material.density * section.area * length);
    let m2 = &g0 * (material.density * section.inertia * length);

    let mut stiffness = DMatrix::zeros(2 * n, 2 * n);
    stiffness.view_mut((0, 0), (n, n)).copy_from(&k1);
    stiffness.view_mut((0, n), (n, n)).copy_from(&k2);
    stiffness.view_mut((n, 0), (n, n)).copy_from(&k2.transpose());
    stiffness.view_mut((n, n), (n, n)).copy_from(&k4);

    let mut mass = DMatrix::zeros(2 * n, 2 * n);
    mass.view_mut((0, 0), (n, n)).copy_from(&m1);
    mass.view_mut((n, n), (n, n)).copy_from(&m2);

    Ok(ElementMatrices { mass, stiffness })
}

fn check_length(length: f64) -> Result<()> {
    if length > 0.0 && length.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("element length must be positive, got {length}")))
    }
}

/// A crack interface: the node pair that replaces one shared element node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackInterface {
    /// Element boundary index `b`, between elements `b − 1` and `b`.
    pub boundary: usize,
    pub position: f64,
    pub left_node: usize,
    pub right_node: usize,
}

/// Uniform 1D mesh of BSWI4,3 elements.
#[derive(Debug, Clone)]
pub struct Mesh1D {
    pub length: f64,
    pub n_el: usize,
    pub element_length: f64,
    pub kind: Structure,
    /// Node coordinates; the two nodes of a crack interface share `x`.
    pub node_x: Vec<f64>,
    /// Global node indices of each element, left to right.
    pub element_nodes: Vec<[usize; NODES_PER_ELEMENT]>,
    pub crack_interfaces: Vec<CrackInterface>,
}

impl Mesh1D {
    /// Builds the mesh, splitting the shared node at every crack position.
    ///
    /// Each position must fall on an interior element boundary within
    /// `1e-9 · L`.
    pub fn new(length: f64, n_el: usize, kind: Structure, crack_positions: &[f64]) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter(format!("length must be positive, got {length}")));
        }
        if n_el == 0 {
            return Err(Error::Parameter("at least one element is required".into()));
        }
        let le = length / n_el as f64;

        let mut boundaries = Vec::with_capacity(crack_positions.len());
        for &x in crack_positions {
            let b = (x / le).round();
            if !(x > 0.0 && x < length) || (b * le - x).abs() > 1e-9 * length {
                return Err(Error::Mesh(format!(
                    "crack at {x} m is not on an element boundary (element length {le} m)"
                )));
            }
            let b = b as usize;
            if b == 0 || b >= n_el {
                return Err(Error::Mesh(format!("crack at {x} m is at a structure end")));
            }
            if boundaries.iter().any(|&(other, _)| other == b) {
                return Err(Error::config(
                    "cracks",
                    format!("duplicate crack location {x} m"),
                ));
            }
            boundaries.push((b, x));
        }
        boundaries.sort_by_key(|p| p.0);

        let per = NODES_PER_ELEMENT - 1;
        let mut node_x = Vec::with_capacity(per * n_el + 1 + boundaries.len());
        let mut element_nodes = Vec::with_capacity(n_el);
        let mut crack_interfaces = Vec::with_capacity(boundaries.len());
        let mut cursor = boundaries.iter().peekable();
        for e in 0..n_el {
            let x0 = e as f64 * le;
            let mut first = node_x.len();
            if e == 0 {
                node_x.push(x0);
            } else {
                first -= 1;
                if let Some(&&(b, pos)) = cursor.peek() {
                    if b == e {
                        cursor.next();
                        node_x.push(x0);
                        crack_interfaces.push(CrackInterface {
                            boundary: b,
                            position: pos,
                            left_node: first,
                            right_node: first + 1,
                        });
                        first += 1;
                    }
                }
            }
            for r in 1..=per {
                node_x.push(x0 + le * r as f64 / per as f64);
            }
            let mut nodes = [0; NODES_PER_ELEMENT];
            for (r, slot) in nodes.iter_mut().enumerate() {
                *slot = first + r;
            }
            element_nodes.push(nodes);
        }
        // Pin the far end exactly.
        if let Some(last) = node_x.last_mut() {
            *last = length;
        }

        Ok(Self {
            length,
            n_el,
            element_length: le,
            kind,
            node_x,
            element_nodes,
            crack_interfaces,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_x.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.kind.dofs_per_node()
    }

    /// Global DOF of component `comp` at `node`, interleaved per node.
    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.kind.dofs_per_node() + comp
    }

    /// Closed-form DOF count for an uncracked mesh.
    pub fn intact_dof_count(kind: Structure, n_el: usize) -> usize {
        kind.dofs_per_node() * ((NODES_PER_ELEMENT - 1) * n_el + 1)
    }

    /// The node closest to `x`; the left face wins at a crack interface.
    pub fn nearest_node(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, &xi) in self.node_x.iter().enumerate() {
            if (xi - x).abs() < (self.node_x[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// Assembled mass and stiffness after eliminating constrained DOFs.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Constrained DOFs, in unreduced numbering.
    pub constrained_dofs: Vec<usize>,
    /// Unreduced DOF → reduced index.
    pub dof_map: Vec<Option<usize>>,
    /// Reduced index of the primary DOF (u or w) at the left end, if free.
    pub force_dof: Option<usize>,
}

impl GlobalSystem {
    pub fn n_dofs(&self) -> usize {
        self.mass.nrows()
    }

    pub fn reduced(&self, dof: usize) -> Option<usize> {
        self.dof_map.get(dof).copied().flatten()
    }
}

/// Assembles the global system.
///
/// Overlapping end-node DOFs are summed, each crack interface gets its
/// spring coupling, and the fixed-end DOFs of `boundary` are removed.
pub fn assemble(
    mesh: &Mesh1D,
    material: &Material,
    section: &Section,
    cracks: &[CrackSpec],
    boundary: Boundary,
    table: &BasisTable,
) -> Result<GlobalSystem> {
    if cracks.len() != mesh.crack_interfaces.len() {
        return Err(Error::Mesh(format!(
            "{} cracks given for {} crack interfaces",
            cracks.len(),
            mesh.crack_interfaces.len()
        )));
    }

    let element = match mesh.kind {
        Structure::Rod => rod_element(material, section, mesh.element_length, table)?,
        Structure::Beam => beam_element(material, section, mesh.element_length, table)?,
    };

    let dpn = mesh.kind.dofs_per_node();
    let n_full = mesh.n_dofs();
    let mut mass = DMatrix::zeros(n_full, n_full);
    let mut stiffness = DMatrix::zeros(n_full, n_full);

    // Local ordering is component-major ([w.. | θ..]); global is node-major.
    let locate: Vec<Vec<usize>> = mesh
        .element_nodes
        .par_iter()
        .map(|nodes| {
            (0..dpn)
                .flat_map(|c| nodes.iter().map(move |&nd| mesh.dof(nd, c)))
                .collect()
        })
        .collect();
    for dofs in &locate {
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                mass[(ga, gb)] += element.mass[(a, b)];
                stiffness[(ga, gb)] += element.stiffness[(a, b)];
            }
        }
    }

    for iface in &mesh.crack_interfaces {
        let crack = cracks
            .iter()
            .find(|c| (c.position - iface.position).abs() <= 1e-9 * mesh.length)
            .ok_or_else(|| {
                Error::Mesh(format!("no crack matches interface at {} m", iface.position))
            })?;
        let coupling = spring_coupling(crack, mesh.kind).map_err(|e| match e {
            Error::NoCrack => Error::config(
                "cracks",
                format!("zero-depth crack at {} m must not split the mesh", crack.position),
            ),
            other => other,
        })?;
        let dofs: Vec<usize> = [iface.left_node, iface.right_node]
            .iter()
            .flat_map(|&nd| (0..dpn).map(move |c| mesh.dof(nd, c)))
            .collect();
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                stiffness[(ga, gb)] += coupling.matrix[(a, b)];
            }
        }
    }

    let last = mesh.n_nodes() - 1;
    let fixed_nodes: &[usize] = match boundary {
        Boundary::FreeFree => &[],
        Boundary::FixedFree => &[0],
        Boundary::FixedFixed => &[0, last],
    };
    let constrained_dofs: Vec<usize> = fixed_nodes
        .iter()
        .flat_map(|&nd| (0..dpn).map(move |c| mesh.dof(nd, c)))
        .collect();
    let mut dof_map = vec![None; n_full];
    let mut next = 0;
    for (dof, slot) in dof_map.iter_mut().enumerate() {
        if !constrained_dofs.contains(&dof) {
            *slot = Some(next);
            next += 1;
        }
    }
    let keep: Vec<usize> = (0..n_full).filter(|d| dof_map[*d].is_some()).collect();
    let mass = mass.select_rows(&keep).select_columns(&keep);
    let stiffness = stiffness.select_rows(&keep).select_columns(&keep);
    let force_dof = dof_map[mesh.dof(0, 0)];

    Ok(GlobalSystem {
        mass,
        stiffness,
        constrained_dofs,
        dof_map,
        force_dof,
    })
}

/// Natural frequencies (Hz, ascending) of `K φ = ω² M φ`.
pub fn natural_frequencies(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = generalized_eigenvalues(mass, stiffness)?;
    Ok(eig
        .into_iter()
        .map(|l| l.max(0.0).sqrt() / (2.0 * PI))
        .collect())
}

/// Eigenvalues `ω²` (ascending) via the Cholesky-reduced symmetric problem.
pub fn generalized_eigenvalues(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(stiffness)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crack::ModeTwoVariant;
    use nalgebra::DVector;

    fn table() -> BasisTable {
        BasisTable::bswi43()
    }

    fn rel_asym(m: &DMatrix<f64>) -> f64 {
        (m - m.transpose()).amax() / m.amax()
    }

    #[test]
    fn material_presets_and_validation() {
        let al = Material::aluminum();
        assert!((al.shear_modulus() - 70e9 / 2.6).abs() < 1.0);
        assert!((al.bar_velocity() - 5063.7).abs() < 0.1);
        assert!(Material::new(-1.0, 0.3, 1.0).is_err());
        assert!(Material::new(1.0, 0.5, 1.0).is_err());
        assert!(Material::new(1.0, 0.3, 0.0).is_err());
    }

    #[test]
    fn rod_element_mass_and_rigid_mode() {
        let sec = Section::circular(0.012).unwrap();
        let mat = Material::aluminum();
        let le = 1.5 / 16.0;
        let el = rod_element(&mat, &sec, le, &table()).unwrap();
        let total = mat.density * sec.area * le;
        assert!((el.mass.sum() - total).abs() < 1e-12 * total);
        let ones = DVector::from_element(11, 1.0);
        assert!((&el.stiffness * ones).amax() < 1e-9 * el.stiffness.amax());
        assert!(rel_asym(&el.mass) < 1e-12 && rel_asym(&el.stiffness) < 1e-12);
    }

    #[test]
    fn beam_element_blocks() {
        let sec = Section::rectangular(0.012, 0.012).unwrap();
        let mat = Material::steel();
        let le = 0.1;
        let el = beam_element(&mat, &sec, le, &table()).unwrap();
        assert!(rel_asym(&el.stiffness) < 1e-12);
        let m1 = el.mass.view((0, 0), (11, 11)).sum();
        let total = mat.density * sec.area * le;
        assert!((m1 - total).abs() < 1e-12 * total);
        assert_eq!(el.mass.view((0, 11), (11, 11)).amax(), 0.0);
    }

    #[test]
    fn beam_element_has_two_rigid_modes() {
        let sec = Section::rectangular(0.012, 0.012).unwrap();
        let el = beam_element(&Material::steel(), &sec, 0.1, &table()).unwrap();
        let eig = el.stiffness.clone().symmetric_eigen().eigenvalues;
        let max = eig.amax();
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-8 * max).count(), 2);
        assert!(eig.iter().all(|&v| v > -1e-8 * max));

        // Translation w = 1, θ = 0 and rotation w = x, θ = 1 carry no strain.
        let nodes = &table().spec.nodes;
        let mut translate = DVector::zeros(22);
        let mut rotate = DVector::zeros(22);
        for i in 0..11 {
            translate[i] = 1.0;
            rotate[i] = nodes[i] * 0.1;
            rotate[11 + i] = 1.0;
        }
        assert!((&el.stiffness * translate).amax() < 1e-8 * max);
        assert!((&el.stiffness * rotate).amax() < 1e-8 * max);
    }

    #[test]
    fn dof_counts() {
        let mesh = Mesh1D::new(1.5, 16, Structure::Rod, &[]).unwrap();
        assert_eq!(mesh.n_dofs(), 161);
        assert_eq!(Mesh1D::intact_dof_count(Structure::Rod, 16), 161);
        let cracked = Mesh1D::new(1.5, 16, Structure::Rod, &[0.75]).unwrap();
        assert_eq!(cracked.n_dofs(), 162);
        let beam = Mesh1D::new(1.8, 16, Structure::Beam, &[]).unwrap();
        assert_eq!(beam.n_dofs(), 2 * 161);
    }

    #[test]
    fn crack_interface_duplicates_node() {
        let mesh = Mesh1D::new(1.5, 16, Structure::Rod, &[0.75]).unwrap();
        let iface = mesh.crack_interfaces[0];
        assert_eq!(iface.boundary, 8);
        assert_eq!(iface.right_node, iface.left_node + 1);
        assert_eq!(mesh.node_x[iface.left_node], mesh.node_x[iface.right_node]);
        assert_eq!(mesh.element_nodes[7][10], iface.left_node);
        assert_eq!(mesh.element_nodes[8][0], iface.right_node);
        assert_eq!(*mesh.node_x.last().unwrap(), 1.5);
    }

    #[test]
    fn crack_placement_errors() {
        assert!(matches!(
            Mesh1D::new(1.5, 16, Structure::Rod, &[0.15]),
            Err(Error::Mesh(_))
        ));
        assert!(matches!(
            Mesh1D::new(1.5, 16, Structure::Rod, &[0.75, 0.75]),
            Err(Error::Config { .. })
        ));
        assert!(Mesh1D::new(1.5, 16, Structure::Rod, &[1.5]).is_err());
    }

    #[test]
    fn assembled_rod_properties() {
        let mesh = Mesh1D::new(1.5, 16, Structure::Rod, &[]).unwrap();
        let sys = assemble(
            &mesh,
            &Material::aluminum(),
            &Section::circular(0.012).unwrap(),
            &[],
            Boundary::FreeFree,
            &table(),
        )
        .unwrap();
        assert_eq!(sys.n_dofs(), 161);
        let ones = DVector::from_element(161, 1.0);
        assert!((&sys.stiffness * ones).amax() < 1e-9 * sys.stiffness.amax());
        assert!(rel_asym(&sys.stiffness) < 1e-12 && rel_asym(&sys.mass) < 1e-12);
        assert!(sys.mass.clone().cholesky().is_some());
        assert_eq!(sys.force_dof, Some(0));

        let eig = generalized_eigenvalues(&sys.mass, &sys.stiffness).unwrap();
        let max = eig.last().copied().unwrap();
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-8 * max).count(), 1);
    }

    #[test]
    fn assembled_beam_has_two_rigid_modes() {
        let mesh = Mesh1D::new(1.8, 8, Structure::Beam, &[]).unwrap();
        let sys = assemble(
            &mesh,
            &Material::steel(),
            &Section::rectangular(0.012, 0.012).unwrap(),
            &[],
            Boundary::FreeFree,
            &table(),
        )
        .unwrap();
        assert!(rel_asym(&sys.stiffness) < 1e-12);
        let eig = generalized_eigenvalues(&sys.mass, &sys.stiffness).unwrap();
        assert!(eig[0].abs() < 1e-6 * eig[2] && eig[1].abs() < 1e-6 * eig[2]);
        // First free-free bending mode, (4.7300 L)^4 EI / (ρ A L^4) for a slender beam.
        let sec = Section::rectangular(0.012, 0.012).unwrap();
        let mat = Material::steel();
        let beta: f64 = 4.730_040_744_862_704 / 1.8;
        let omega2 = beta.powi(4) * mat.youngs_modulus * sec.inertia / (mat.density * sec.area);
        assert!((eig[2] / omega2 - 1.0).abs() < 2e-3, "{} vs {omega2}", eig[2]);
    }

    #[test]
    fn cracked_assembly_and_constraints() {
        let mat = Material::aluminum();
        let sec = Section::rectangular(0.012, 0.012).unwrap();
        let mesh = Mesh1D::new(1.5, 20, Structure::Rod, &[0.45]).unwrap();
        let crack = CrackSpec::new(0.45, 0.2, &mat, &sec, &ModeTwoVariant::Printed).unwrap();
        let sys = assemble(&mesh, &mat, &sec, &[crack.clone()], Boundary::FreeFree, &table())
            .unwrap();
        assert_eq!(sys.n_dofs(), 202);
        let ones = DVector::from_element(202, 1.0);
        assert!((&sys.stiffness * ones).amax() < 1e-9 * sys.stiffness.amax());

        let fixed =
            assemble(&mesh, &mat, &sec, &[crack], Boundary::FixedFixed, &table()).unwrap();
        assert_eq!(fixed.n_dofs(), 200);
        assert_eq!(fixed.force_dof, None);
        assert!(fixed.mass.clone().cholesky().is_some());
    }

    #[test]
    fn zero_depth_crack_cannot_split_mesh() {
        let mat = Material::aluminum();
        let sec = Section::rectangular(0.012, 0.012).unwrap();
        let mesh = Mesh1D::new(1.5, 20, Structure::Rod, &[0.45]).unwrap();
        let crack = CrackSpec::new(0.45, 0.0, &mat, &sec, &ModeTwoVariant::Printed).unwrap();
        let err = assemble(&mesh, &mat, &sec, &[crack], Boundary::FreeFree, &table());
        assert!(matches!(err, Err(Error::Config { .. })));
    }

    #[test]
    fn fixed_free_rod_fundamental_frequency() {
        let mat = Material::aluminum();
        let mesh = Mesh1D::new(1.5, 16, Structure::Rod, &[]).unwrap();
        let sys = assemble(
            &mesh,
            &mat,
            &Section::circular(0.012).unwrap(),
            &[],
            Boundary::FixedFree,
            &table(),
        )
        .unwrap();
        let f = natural_frequencies(&sys.mass, &sys.stiffness).unwrap();
        let c0 = mat.bar_velocity();
        for (n, &fi) in f.iter().take(3).enumerate() {
            let exact = (2.0 * n as f64 + 1.0) * c0 / (4.0 * 1.5);
            assert!((fi - exact).abs() / exact < 5e-3, "mode {n}: {fi} vs {exact}");
        }
        assert!((f[0] - 843.8).abs() / 843.8 < 5e-3);
    }

    #[test]
    fn refinement_changes_low_frequencies_little() {
        for (kind, sec, mat, len) in [
            (Structure::Rod, Section::circular(0.012).unwrap(), Material::aluminum(), 1.5),
            (
                Structure::Beam,
                Section::rectangular(0.012, 0.012).unwrap(),
                Material::steel(),
                1.8,
            ),
        ] {
            let rigid = kind.dofs_per_node();
            let freqs = |n_el| {
                let mesh = Mesh1D::new(len, n_el, kind, &[]).unwrap();
                let sys = assemble(&mesh, &mat, &sec, &[], Boundary::FreeFree, &table()).unwrap();
                natural_frequencies(&sys.mass, &sys.stiffness).unwrap()
            };
            let coarse = freqs(8);
            let fine = freqs(16);
            for i in rigid..rigid + 5 {
                let rel = (coarse[i] - fine[i]).abs() / fine[i];
                assert!(rel < 1e-3, "{kind:?} mode {i}: {rel:e}");
            }
        }
    }
}

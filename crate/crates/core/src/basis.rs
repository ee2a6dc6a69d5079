//! BSWI scaling functions on the unit element.
//!
//! The order-`m`, scale-`j` scaling functions are realized as the clamped
//! B-spline basis on `[0, 1]` with `m`-fold boundary knots and simple
//! interior knots `k / 2^j`. For BSWI4,3 that gives the familiar eleven
//! functions. Element interpolation goes through the nodal transform `R`
//! so that the shape functions `N = Φ R` satisfy `N_i(ξ_j) = δ_ij`.

use nalgebra::{DMatrix, DVector};

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Order, scale, knot vector and element nodes of a BSWI basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub order: usize,
    pub scale: u32,
    pub count: usize,
    pub knots: Vec<f64>,
    pub nodes: Vec<f64>,
}

/// Builds the clamped-knot spec with uniformly spaced element nodes.
pub fn build_basis(order: usize, scale: u32) -> Result<BasisSpec> {
    if order < 2 {
        return Err(Error::Parameter(format!(
            "B-spline order must be at least 2, got {order}"
        )));
    }
    if scale > 16 {
        return Err(Error::Parameter(format!("scale {scale} is unreasonably large")));
    }
    let spans = 1usize << scale;
    let count = spans + order - 1;

    let mut knots = Vec::with_capacity(count + order);
    knots.extend(std::iter::repeat(0.0).take(order));
    knots.extend((1..spans).map(|k| k as f64 / spans as f64));
    knots.extend(std::iter::repeat(1.0).take(order));

    let nodes = (0..count)
        .map(|i| i as f64 / (count - 1) as f64)
        .collect();

    Ok(BasisSpec {
        order,
        scale,
        count,
        knots,
        nodes,
    })
}

impl BasisSpec {
    /// The BSWI4,3 basis used by the rod and beam elements.
    pub fn bswi43() -> Self {
        build_basis(4, 3).expect("(4, 3) is a valid basis")
    }

    fn degree(&self) -> usize {
        self.order - 1
    }

    /// Knot span `s` with `knots[s] <= xi < knots[s + 1]`; the last span for `xi == 1`.
    fn span(&self, xi: f64) -> usize {
        let p = self.degree();
        let last = self.count - 1;
        if xi >= self.knots[last + 1] {
            return last;
        }
        // knots[p..=last + 1] is sorted; find the last knot <= xi.
        let upper = self.knots[p..=last + 1].partition_point(|&k| k <= xi);
        (p + upper - 1).clamp(p, last)
    }

    fn check_domain(xi: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&xi) || xi.is_nan() {
            return Err(Error::Domain {
                value: xi,
                domain: "[0, 1]",
            });
        }
        Ok(())
    }

    /// Nonzero degree-`p` B-splines at `xi` on `span`, indices `span - p ..= span`.
    fn nonzero(&self, span: usize, xi: f64, p: usize) -> Vec<f64> {
        let u = &self.knots;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Scaling-function row vector `Φ(ξ)`.
    pub fn eval_phi(&self, xi: f64) -> Result<DVector<f64>> {
        Self::check_domain(xi)?;
        let p = self.degree();
        let s = self.span(xi);
        let local = self.nonzero(s, xi, p);
        let mut phi = DVector::zeros(self.count);
        for (r, v) in local.into_iter().enumerate() {
            phi[s - p + r] = v;
        }
        Ok(phi)
    }

    /// `dΦ/dξ`; at interior knots this is the right derivative.
    pub fn eval_dphi(&self, xi: f64) -> Result<DVector<f64>> {
        Self::check_domain(xi)?;
        let p = self.degree();
        let s = self.span(xi);
        let u = &self.knots;
        // Degree p-1 functions on this span cover indices s-p+1 ..= s.
        let lower = self.nonzero(s, xi, p - 1);
        let lower_at = |i: usize| -> f64 {
            if i + p < s + 1 || i > s {
                0.0
            } else {
                lower[i + p - 1 - s]
            }
        };
        let pf = p as f64;
        let mut d = DVector::zeros(self.count);
        for i in (s - p)..=s {
            let mut v = 0.0;
            let d1 = u[i + p] - u[i];
            if d1 > 0.0 {
                v += pf * lower_at(i) / d1;
            }
            let d2 = u[i + p + 1] - u[i + 1];
            if d2 > 0.0 {
                v -= pf * lower_at(i + 1) / d2;
            }
            d[i] = v;
        }
        Ok(d)
    }

    /// Nonempty knot spans `[a, b)`.
    pub fn spans(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
    }
}

/// Nodal transform and element integrals of a basis.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub spec: BasisSpec,
    /// `R = P⁻¹` with `P[i][k] = φ_k(ξ_i)`.
    pub r: DMatrix<f64>,
    /// `∫ Φᵀ Φ dξ`
    pub gamma0: DMatrix<f64>,
    /// `∫ Φ'ᵀ Φ' dξ`
    pub gamma1: DMatrix<f64>,
    /// `∫ Φ'ᵀ Φ dξ`, rows indexed by the differentiated function.
    pub gamma01: DMatrix<f64>,
}

/// Builds `R` and the Γ integrals by per-span Gauss–Legendre quadrature.
pub fn build_table(spec: &BasisSpec) -> Result<BasisTable> {
    let n = spec.count;
    let mut nodal = DMatrix::zeros(n, n);
    for (i, &xi) in spec.nodes.iter().enumerate() {
        let phi = spec.eval_phi(xi)?;
        nodal.set_row(i, &phi.transpose());
    }
    let r = nodal.lu().try_inverse().ok_or_else(|| {
        Error::Construction("nodal interpolation matrix is singular; check node placement".into())
    })?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Construction("nodal transform is not finite".into()));
    }

    // Integrands have degree <= 2(m - 1); an (m + 1)-point rule is exact.
    let rule = GaussLegendre::new(spec.order + 1);
    let mut gamma0 = DMatrix::zeros(n, n);
    let mut gamma1 = DMatrix::zeros(n, n);
    let mut gamma01 = DMatrix::zeros(n, n);
    for (a, b) in spec.spans() {
        for (x, w) in rule.mapped(a, b) {
            let phi = spec.eval_phi(x)?;
            let dphi = spec.eval_dphi(x)?;
            gamma0.ger(w, &phi, &phi, 1.0);
            gamma1.ger(w, &dphi, &dphi, 1.0);
            gamma01.ger(w, &dphi, &phi, 1.0);
        }
    }

    Ok(BasisTable {
        spec: spec.clone(),
        r,
        gamma0,
        gamma1,
        gamma01,
    })
}

impl BasisTable {
    pub fn bswi43() -> Self {
        build_table(&BasisSpec::bswi43()).expect("BSWI4,3 table")
    }

    pub fn size(&self) -> usize {
        self.spec.count
    }

    /// Shape functions `N(ξ) = Φ(ξ) R` as a column vector.
    pub fn shape(&self, xi: f64) -> Result<DVector<f64>> {
        Ok(self.r.tr_mul(&self.spec.eval_phi(xi)?))
    }

    /// `dN/dξ`.
    pub fn shape_deriv(&self, xi: f64) -> Result<DVector<f64>> {
        Ok(self.r.tr_mul(&self.spec.eval_dphi(xi)?))
    }

    /// `Rᵀ G R` for one of the Γ matrices.
    pub fn nodal(&self, gamma: &DMatrix<f64>) -> DMatrix<f64> {
        self.r.transpose() * gamma * &self.r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_basis_knots_and_count() {
        let s = build_basis(2, 0).unwrap();
        assert_eq!(s.count, 2);
        assert_eq!(s.knots, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn bswi43_layout() {
        let s = BasisSpec::bswi43();
        assert_eq!(s.count, 11);
        assert_eq!(s.knots.len(), s.count + s.order);
        assert!(s.knots[..4].iter().all(|&k| k == 0.0));
        assert!(s.knots[11..].iter().all(|&k| k == 1.0));
        let interior: Vec<f64> = (1..8).map(|k| k as f64 / 8.0).collect();
        assert_eq!(&s.knots[4..11], interior.as_slice());
        for (i, &x) in s.nodes.iter().enumerate() {
            assert!((x - i as f64 / 10.0).abs() < 1e-15);
        }
        assert_eq!(s.nodes[0], 0.0);
        assert_eq!(s.nodes[10], 1.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(build_basis(1, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn hat_functions_for_order_two() {
        let s = build_basis(2, 0).unwrap();
        assert_eq!(s.eval_phi(0.0).unwrap().as_slice(), &[1.0, 0.0]);
        let mid = s.eval_phi(0.25).unwrap();
        assert!((mid[0] - 0.75).abs() < 1e-15 && (mid[1] - 0.25).abs() < 1e-15);
        assert_eq!(s.eval_dphi(0.5).unwrap().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn endpoint_interpolation() {
        let s = BasisSpec::bswi43();
        let phi0 = s.eval_phi(0.0).unwrap();
        assert_eq!(phi0[0], 1.0);
        assert!(phi0.iter().skip(1).all(|&v| v == 0.0));
        let phi1 = s.eval_phi(1.0).unwrap();
        assert_eq!(phi1[10], 1.0);
        assert!(phi1.iter().take(10).all(|&v| v == 0.0));
    }

    #[test]
    fn local_support_at_midpoint() {
        let phi = BasisSpec::bswi43().eval_phi(0.5).unwrap();
        assert!((phi.sum() - 1.0).abs() < 1e-15);
        assert!(phi.iter().filter(|v| **v != 0.0).count() <= 4);
    }

    #[test]
    fn out_of_domain() {
        let s = BasisSpec::bswi43();
        assert!(matches!(s.eval_phi(1.2), Err(Error::Domain { .. })));
        assert!(matches!(s.eval_dphi(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let s = BasisSpec::bswi43();
        let h = 1e-6;
        let xi = 0.37;
        let fd = (s.eval_phi(xi + h).unwrap() - s.eval_phi(xi - h).unwrap()) / (2.0 * h);
        let d = s.eval_dphi(xi).unwrap();
        assert!((fd - d).amax() < 1e-5);
    }

    #[test]
    fn right_derivative_at_interior_knot() {
        // Cubic splines are C2 at simple knots, so left and right agree anyway;
        // order 2 exposes the one-sidedness.
        let s = build_basis(2, 1).unwrap();
        let d = s.eval_dphi(0.5).unwrap();
        assert_eq!(d.as_slice(), &[0.0, -2.0, 2.0]);
    }

    #[test]
    fn kronecker_property_of_shape_functions() {
        let t = BasisTable::bswi43();
        for (j, &xj) in t.spec.nodes.iter().enumerate() {
            let n = t.shape(xj).unwrap();
            for i in 0..11 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((n[i] - expect).abs() < 1e-10, "N_{i}({xj})");
            }
        }
    }

    #[test]
    fn shape_functions_overshoot_one() {
        let t = BasisTable::bswi43();
        let peak = (0..=2000)
            .map(|k| t.shape(k as f64 / 2000.0).unwrap().max())
            .fold(f64::MIN, f64::max);
        assert!(peak > 1.0, "max shape value {peak}");
    }

    #[test]
    fn gamma_sums() {
        let t = BasisTable::bswi43();
        assert!((t.gamma0.sum() - 1.0).abs() < 1e-13);
        let ones = DVector::from_element(11, 1.0);
        assert!((&t.gamma1 * &ones).amax() < 1e-12);
        assert!((t.gamma1.transpose() * &ones).amax() < 1e-12);
    }

    #[test]
    fn gamma_definiteness() {
        let t = BasisTable::bswi43();
        assert!(t.gamma0.clone().cholesky().is_some());
        let eig = t.gamma1.clone().symmetric_eigen().eigenvalues;
        let max = eig.amax();
        let zeros = eig.iter().filter(|v| v.abs() < 1e-10 * max).count();
        assert_eq!(zeros, 1);
        assert!(eig.iter().all(|&v| v > -1e-10 * max));
    }

    #[test]
    fn gamma_matches_simpson_oracle() {
        let s = BasisSpec::bswi43();
        let t = build_table(&s).unwrap();
        let samples = 100_000;
        let h = 1.0 / samples as f64;
        let mut g0 = DMatrix::<f64>::zeros(11, 11);
        let mut g1 = DMatrix::<f64>::zeros(11, 11);
        let mut g01 = DMatrix::<f64>::zeros(11, 11);
        for k in 0..=samples {
            let x = k as f64 * h;
            let w = h / 3.0
                * if k == 0 || k == samples {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
            let p = s.eval_phi(x).unwrap();
            let d = s.eval_dphi(x).unwrap();
            g0 += w * &p * p.transpose();
            g1 += w * &d * d.transpose();
            g01 += w * &d * p.transpose();
        }
        for (got, oracle) in [(&t.gamma0, &g0), (&t.gamma1, &g1), (&t.gamma01, &g01)] {
            let rel = (got - oracle).amax() / oracle.amax();
            assert!(rel < 1e-8, "relative deviation {rel:e}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn partition_of_unity(xi in 0.0f64..=1.0) {
            let s = BasisSpec::bswi43();
            let phi = s.eval_phi(xi).unwrap();
            prop_assert!((phi.sum() - 1.0).abs() < 1e-12);
            prop_assert!(phi.iter().all(|&v| v >= 0.0));
            prop_assert!(s.eval_dphi(xi).unwrap().sum().abs() < 1e-12);
        }
    }
}

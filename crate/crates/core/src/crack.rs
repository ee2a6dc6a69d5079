//! Open-crack spring model.
//!
//! A crack is a massless spring joining the two faces of a duplicated
//! interface node. Its flexibilities come from the stress-intensity
//! correction functions integrated over the crack depth.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::elements::{Material, Section, SectionShape, Structure};
use crate::quadrature::integrate_adaptive;
use crate::{Error, Result};

/// Largest admissible depth ratio `a / h`.
pub const MAX_DEPTH_RATIO: f64 = 0.95;

const FLEXIBILITY_REL_TOL: f64 = 1e-10;

/// Mode-I correction function `f_I(a/h)`.
pub fn f_i(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain {
            value: r,
            domain: "[0, 1)",
        });
    }
    if r == 0.0 {
        return Ok(0.752 + 0.37);
    }
    let x = 0.5 * PI * r;
    let poly = 0.752 + 2.02 * r + 0.37 * (1.0 - x.sin()).powi(3);
    Ok((x.tan() / x).sqrt() * poly / x.cos())
}

/// Which mode-II correction function the shear flexibility integrates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModeTwoVariant {
    /// Same expression as `f_I`.
    #[default]
    Printed,
    /// `(Σ c_i r^i) / sqrt(1 - r)`, the handbook form for an edge crack in shear.
    Tada { coeffs: Vec<f64> },
}

impl ModeTwoVariant {
    pub fn tada_handbook() -> Self {
        ModeTwoVariant::Tada {
            coeffs: vec![1.122, -0.561, 0.085, 0.18],
        }
    }
}

/// Mode-II correction function `f_II(a/h)`.
pub fn f_ii(r: f64, variant: &ModeTwoVariant) -> Result<f64> {
    match variant {
        ModeTwoVariant::Printed => f_i(r),
        ModeTwoVariant::Tada { coeffs } => {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Domain {
                    value: r,
                    domain: "[0, 1)",
                });
            }
            let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c);
            Ok(poly / (1.0 - r).sqrt())
        }
    }
}

fn check_depth(a: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("section height must be positive, got {h}")));
    }
    let r = a / h;
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain {
            value: r,
            domain: "crack depth ratio a/h in [0, 1)",
        });
    }
    if r > MAX_DEPTH_RATIO {
        return Err(Error::Domain {
            value: r,
            domain: "crack depth ratio a/h <= 0.95",
        });
    }
    Ok(r)
}

/// `∫₀ᵃ (α/h²) f(α/h)² dα`, which after substitution is `∫₀^{a/h} r f(r)² dr`.
fn depth_integral(r_max: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if r_max == 0.0 {
        return Ok(0.0);
    }
    integrate_adaptive(
        |r| {
            let v = f(r).unwrap_or(f64::NAN);
            r * v * v
        },
        0.0,
        r_max,
        FLEXIBILITY_REL_TOL,
        0.0,
    )
}

/// Axial flexibility `c_a` (m/N).
pub fn axial_flexibility(a: f64, e: f64, b: f64, h: f64) -> Result<f64> {
    let r = check_depth(a, h)?;
    Ok(2.0 * PI / (e * b) * depth_integral(r, f_i)?)
}

/// Rotational flexibility `c_b` (rad/(N·m)).
pub fn rotational_flexibility(a: f64, e: f64, b: f64, h: f64) -> Result<f64> {
    let r = check_depth(a, h)?;
    Ok(72.0 * PI / (e * b * h * h) * depth_integral(r, f_i)?)
}

/// Shear flexibility `c_s` (m/N).
pub fn shear_flexibility(
    a: f64,
    e: f64,
    b: f64,
    h: f64,
    shear_factor: f64,
    variant: &ModeTwoVariant,
) -> Result<f64> {
    let r = check_depth(a, h)?;
    let k2 = shear_factor * shear_factor;
    Ok(2.0 * k2 * PI / (e * b) * depth_integral(r, |x| f_ii(x, variant))?)
}

/// A crack located at an element boundary, with its spring flexibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackSpec {
    pub position: f64,
    pub depth: f64,
    pub depth_ratio: f64,
    pub axial: f64,
    pub rotational: f64,
    pub shear: f64,
}

impl CrackSpec {
    /// Computes all three flexibilities for a crack of depth `depth_ratio · h`
    /// in a rectangular section.
    pub fn new(
        position: f64,
        depth_ratio: f64,
        material: &Material,
        section: &Section,
        variant: &ModeTwoVariant,
    ) -> Result<Self> {
        let (b, h) = match section.shape {
            SectionShape::Rectangular { width, height } => (width, height),
            SectionShape::Circular { .. } => {
                return Err(Error::Parameter(
                    "the crack model needs a rectangular section (width and height)".into(),
                ))
            }
        };
        let a = depth_ratio * h;
        let e = material.youngs_modulus;
        Ok(Self {
            position,
            depth: a,
            depth_ratio,
            axial: axial_flexibility(a, e, b, h)?,
            rotational: rotational_flexibility(a, e, b, h)?,
            shear: shear_flexibility(a, e, b, h, section.shear_factor, variant)?,
        })
    }

    pub fn is_open(&self) -> bool {
        self.depth > 0.0
    }
}

/// Stiffness coupling on the interface DOFs.
///
/// Rod: 2×2 on `[u_left, u_right]`. Beam: 4×4 on
/// `[w_left, θ_left, w_right, θ_right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpringCoupling {
    pub matrix: DMatrix<f64>,
}

fn spring(k: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[k, -k, -k, k])
}

pub fn spring_coupling(crack: &CrackSpec, kind: Structure) -> Result<SpringCoupling> {
    if !crack.is_open() {
        return Err(Error::NoCrack);
    }
    let matrix = match kind {
        Structure::Rod => spring(1.0 / crack.axial),
        Structure::Beam => {
            let ks = 1.0 / crack.shear;
            let kb = 1.0 / crack.rotational;
            let mut m = DMatrix::zeros(4, 4);
            for (comp, k) in [(0, ks), (1, kb)] {
                let s = spring(k);
                for i in 0..2 {
                    for j in 0..2 {
                        m[(2 * i + comp, 2 * j + comp)] = s[(i, j)];
                    }
                }
            }
            m
        }
    };
    Ok(SpringCoupling { matrix })
}

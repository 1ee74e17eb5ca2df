//! Symmetric quadrature rules on the reference triangle.
//!
//! Points are barycentric coordinates; weights are normalized to sum to one,
//! so `∫_T f ≈ |T| Σ w_q f(x_q)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: u32,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Smallest tabulated rule that integrates polynomials of total degree
    /// `degree` exactly.
    pub fn exact_for(degree: u32) -> Result<Self> {
        let mut rule = TriangleRule { degree: 0, points: Vec::new(), weights: Vec::new() };
        match degree {
            0 | 1 => {
                rule.degree = 1;
                rule.centroid(1.0);
            }
            2 => {
                rule.degree = 2;
                rule.orbit3(1.0 / 6.0, 1.0 / 3.0);
            }
            3 | 4 => {
                rule.degree = 4;
                rule.orbit3(0.445_948_490_915_965, 0.223_381_589_678_011);
                rule.orbit3(0.091_576_213_509_771, 0.109_951_743_655_322);
            }
            5 => {
                rule.degree = 5;
                rule.centroid(0.225);
                rule.orbit3(0.470_142_064_105_115, 0.132_394_152_788_506);
                rule.orbit3(0.101_286_507_323_456, 0.125_939_180_544_827);
            }
            6 => {
                rule.degree = 6;
                rule.orbit3(0.249_286_745_170_910, 0.116_786_275_726_379);
                rule.orbit3(0.063_089_014_491_502, 0.050_844_906_370_207);
                rule.orbit6(0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374);
            }
            7 | 8 => {
                rule.degree = 8;
                rule.centroid(0.144_315_607_677_787);
                rule.orbit3(0.459_292_588_292_723, 0.095_091_634_267_285);
                rule.orbit3(0.170_569_307_751_760, 0.103_217_370_534_718);
                rule.orbit3(0.050_547_228_317_031, 0.032_458_497_623_198);
                rule.orbit6(0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435);
            }
            d => return Err(Error::UnsupportedQuadrature(d)),
        }
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn centroid(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    // (a, a, 1 − 2a) and permutations
    fn orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        self.points.push([a, a, b]);
        self.points.push([a, b, a]);
        self.points.push([b, a, a]);
        self.weights.extend([w; 3]);
    }

    // (a, b, 1 − a − b) and all six permutations
    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
        }
        self.weights.extend([w; 6]);
    }
}

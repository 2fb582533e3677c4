use rand::Rng;

use super::model::norm_sq;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quadrature::{integrate, unit_sphere_area};

/// Below this argument the transition `exp(-1/u)` is treated as zero; the
/// neglected mass is under `exp(-200)` in value and every derivative used.
const EDGE: f64 = 5e-3;

fn smoothstep(u: &Jet) -> Result<Jet> {
    let v = u.value();
    if v >= 1.0 - EDGE {
        return Ok(Jet::constant(u.space(), 1.0).truncate(u.order()));
    }
    if v <= EDGE {
        return Ok(Jet::constant(u.space(), 0.0).truncate(u.order()));
    }
    let a = (u.recip()? * -1.0).exp();
    let b = ((-u + 1.0).recip()? * -1.0).exp();
    a.div(&(&a + &b))
}

/// Smooth radial transition equal to 1 on `B_{M-1}` and 0 outside `B_{M+1}`.
pub fn mollified_indicator(z: &[Jet], m: f64) -> Result<Jet> {
    let u = (norm_sq(z) * -1.0 + (m + 1.0) * (m + 1.0)) * (1.0 / (4.0 * m));
    smoothstep(&u)
}

/// Value of [`mollified_indicator`] at radius `r`.
pub fn mollified_indicator_value(r: f64, m: f64) -> f64 {
    let u = ((m + 1.0) * (m + 1.0) - r * r) / (4.0 * m);
    if u >= 1.0 - EDGE {
        1.0
    } else if u <= EDGE {
        0.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Normalized bump `φ(w) ∝ exp(-1/(1 - |w|²))` on the unit ball.
#[derive(Debug, Clone)]
pub struct Bump {
    d: usize,
    ln_norm: f64,
}

impl Bump {
    pub fn new(d: usize) -> Result<Bump> {
        let radial = integrate(
            |r| {
                if r >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - r * r)).exp() * r.powi(d as i32 - 1)
                }
            },
            0.0,
            1.0,
            1e-15,
            1e-13,
        )?;
        Ok(Bump {
            d,
            ln_norm: (radial * unit_sphere_area(d)).ln(),
        })
    }

    /// `φ(w)` for a point of the ball.
    pub fn density(&self, w: &[f64]) -> f64 {
        let r2: f64 = w.iter().map(|x| x * x).sum();
        if r2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r2) - self.ln_norm).exp()
        }
    }

    /// `ln φ(w)` on jets.
    pub fn ln_density(&self, w: &[Jet]) -> Result<Jet> {
        let r2 = norm_sq(w);
        if r2.value() >= 1.0 {
            return Err(Error::OutsideSupport);
        }
        Ok((-r2 + 1.0).recip()? * -1.0 - self.ln_norm)
    }

    /// Rejection sample from the uniform ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        for _ in 0..10_000 {
            let w = uniform_ball(self.d, 1.0, rng);
            let r2: f64 = w.iter().map(|x| x * x).sum();
            if r2 < 1.0 && rng.random::<f64>() < (1.0 - 1.0 / (1.0 - r2)).exp() {
                return Ok(w);
            }
        }
        Err(Error::Sampler("bump rejection exhausted".into()))
    }
}

/// Uniform point of the open ball of radius `radius` in `R^d`.
pub fn uniform_ball<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![radius * (2.0 * rng.random::<f64>() - 1.0)];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let r2: f64 = v.iter().map(|x| x * x).sum();
        if r2 < 1.0 && r2 > 0.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetSpace;

    #[test]
    fn indicator_sandwich_values() {
        let m = 5.0;
        assert_eq!(mollified_indicator_value(m - 1.0, m), 1.0);
        assert_eq!(mollified_indicator_value(0.0, m), 1.0);
        assert_eq!(mollified_indicator_value(m + 1.0, m), 0.0);
        assert_eq!(mollified_indicator_value(m + 2.5, m), 0.0);
        let mid = mollified_indicator_value(m, m);
        assert!(mid > 0.0 && mid < 1.0);
        let mut last = 1.0;
        for i in 0..=200 {
            let r = m - 1.0 + 2.0 * i as f64 / 200.0;
            let v = mollified_indicator_value(r, m);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn indicator_derivatives_match_finite_differences() {
        let m = 5.0;
        let s = JetSpace::get(1, 2).unwrap();
        let z = Jet::variable(&s, 0, m);
        let j = mollified_indicator(&[z], m).unwrap();
        let h = 1e-5;
        let f = |r: f64| mollified_indicator_value(r, m);
        let d1 = (f(m + h) - f(m - h)) / (2.0 * h);
        let d2 = (f(m + 1e-4) - 2.0 * f(m) + f(m - 1e-4)) / 1e-8;
        assert!((j.partial(&[0]).unwrap() - d1).abs() < 1e-8);
        assert!((j.partial(&[0, 0]).unwrap() - d2).abs() < 1e-5);
        assert_eq!(j.value(), f(m));
    }

    #[test]
    fn bump_is_normalized() {
        for d in 1..=3 {
            let b = Bump::new(d).unwrap();
            let v = crate::quadrature::radial_integral(
                d,
                |r| {
                    let mut w = vec![0.0; d];
                    w[0] = r;
                    b.density(&w)
                },
                0.0,
                1.0,
                1e-14,
            )
            .unwrap();
            assert!((v - 1.0).abs() < 1e-10, "d = {d}: {v}");
        }
    }
}

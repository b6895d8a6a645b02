//! Shared fixtures: special-function evaluators and small helpers.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use liesym::catalog::SpecialFunctions;
use liesym::expr::{Expr, ParseContext, ScalarFn, Symbol};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const TERMS: usize = 60;

/// `(J0(z), J1(z))` by the power series.
pub fn bessel_j01(z: f64) -> (f64, f64) {
    let q = z * z / 4.0;
    let (mut j0, mut j1) = (0.0, 0.0);
    let mut t0 = 1.0; // (-q)^m / (m!)^2
    let mut t1 = z / 2.0; // (z/2) (-q)^m / (m! (m+1)!)
    for m in 0..TERMS {
        j0 += t0;
        j1 += t1;
        let mf = m as f64 + 1.0;
        t0 *= -q / (mf * mf);
        t1 *= -q / (mf * (mf + 1.0));
    }
    (j0, j1)
}

/// `(Y0(z), Y1(z))` for `z > 0` by the ascending series.
pub fn bessel_y01(z: f64) -> (f64, f64) {
    let (j0, j1) = bessel_j01(z);
    let q = z * z / 4.0;
    let lg = (z / 2.0).ln();
    // Y0 = 2/π (ln(z/2) + γ) J0 + 2/π Σ_{k≥1} (-1)^{k+1} H_k q^k / (k!)^2
    let mut y0 = 2.0 / PI * (lg + EULER_GAMMA) * j0;
    let mut term = 1.0;
    let mut h = 0.0;
    for k in 1..TERMS {
        let kf = k as f64;
        term *= -q / (kf * kf);
        h += 1.0 / kf;
        y0 -= 2.0 / PI * h * term;
    }
    // Y1 = -2/(πz) + 2/π ln(z/2) J1 - z/(2π) Σ (ψ(k+1) + ψ(k+2)) (-q)^k / (k! (k+1)!)
    let mut y1 = -2.0 / (PI * z) + 2.0 / PI * lg * j1;
    let mut term = 1.0;
    let mut hk = 0.0;
    let mut sum = 0.0;
    for k in 0..TERMS {
        let kf = k as f64;
        if k > 0 {
            term *= -q / (kf * (kf + 1.0));
            hk += 1.0 / kf;
        }
        let psi = (-EULER_GAMMA + hk) + (-EULER_GAMMA + hk + 1.0 / (kf + 1.0));
        sum += psi * term;
    }
    y1 -= z / (2.0 * PI) * sum;
    (y0, y1)
}

pub fn bessel_j1(z: f64) -> f64 {
    bessel_j01(z).1
}

pub fn bessel_j1_prime(z: f64) -> f64 {
    let (j0, j1) = bessel_j01(z);
    j0 - j1 / z
}

pub fn bessel_y1(z: f64) -> f64 {
    bessel_y01(z).1
}

pub fn bessel_y1_prime(z: f64) -> f64 {
    let (y0, y1) = bessel_y01(z);
    y0 - y1 / z
}

const AIRY_C1: f64 = 0.355_028_053_887_817_239;
const AIRY_C2: f64 = 0.258_819_403_792_806_798;

/// Maclaurin pieces `(f, f', g, g')` of the Airy functions.
fn airy_fg(z: f64) -> (f64, f64, f64, f64) {
    let z3 = z * z * z;
    let (mut f, mut g, mut df, mut dg) = (0.0, 0.0, 0.0, 0.0);
    let mut tf = 1.0; // z^{3k} coefficient term of f
    let mut tg = z; // z^{3k+1} term of g
    for k in 0..TERMS {
        let kf = k as f64;
        f += tf;
        g += tg;
        if z != 0.0 {
            df += 3.0 * kf * tf / z;
        }
        dg += (3.0 * kf + 1.0) * if z != 0.0 { tg / z } else if k == 0 { 1.0 } else { 0.0 };
        tf *= z3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        tg *= z3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
    }
    (f, df, g, dg)
}

pub fn airy_ai(z: f64) -> (f64, f64) {
    let (f, df, g, dg) = airy_fg(z);
    (AIRY_C1 * f - AIRY_C2 * g, AIRY_C1 * df - AIRY_C2 * dg)
}

pub fn airy_bi(z: f64) -> (f64, f64) {
    let (f, df, g, dg) = airy_fg(z);
    let s3 = 3f64.sqrt();
    (s3 * (AIRY_C1 * f + AIRY_C2 * g), s3 * (AIRY_C1 * df + AIRY_C2 * dg))
}

fn pair(v: fn(f64) -> f64, d: fn(f64) -> f64) -> (ScalarFn, ScalarFn) {
    (Arc::new(v), Arc::new(d))
}

pub fn special_functions() -> SpecialFunctions {
    SpecialFunctions {
        bessel_j1: Some(pair(bessel_j1, bessel_j1_prime)),
        bessel_y1: Some(pair(bessel_y1, bessel_y1_prime)),
        airy_ai: Some(pair(|z| airy_ai(z).0, |z| airy_ai(z).1)),
        airy_bi: Some(pair(|z| airy_bi(z).0, |z| airy_bi(z).1)),
    }
}

pub fn parse(s: &str) -> Expr {
    ParseContext::new().parse(s).unwrap_or_else(|e| panic!("parse `{s}`: {e}"))
}

pub fn t() -> Symbol {
    Symbol::new("t")
}

pub fn eval_t(e: &Expr, tv: f64) -> f64 {
    let mut p = HashMap::new();
    p.insert(t(), tv);
    e.eval(&p).unwrap()
}

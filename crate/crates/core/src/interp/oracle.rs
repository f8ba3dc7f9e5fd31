//! Observational equivalence of two evaluations.
//!
//! A source run that traps or exhausts its fuel has no defined behaviour to
//! preserve, so such samples are skipped. Otherwise the transformed program
//! must return the same value and produce exactly the same trace.

use super::{eval_cfg, Run, Trap, Value, DEFAULT_FUEL};
use crate::source::Module;
use crate::types::Type;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Fuel multiplier granted to transformed programs, whose operation counts
/// differ from the source by a bounded factor.
pub const FUEL_FACTOR: u64 = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Agree,
    Skipped(Trap),
    Differ(String),
}

impl Verdict {
    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::Differ(_))
    }
}

pub fn compare(reference: &Result<Run, Trap>, candidate: &Result<Run, Trap>) -> Verdict {
    let r = match reference {
        Err(t) => return Verdict::Skipped(t.clone()),
        Ok(r) => r,
    };
    let c = match candidate {
        Err(t) => return Verdict::Differ(format!("reference returned, candidate trapped: {t}")),
        Ok(c) => c,
    };
    if r.result != c.result {
        return Verdict::Differ(format!("results differ: {:?} vs {:?}", r.result, c.result));
    }
    if r.trace != c.trace {
        let at = r.trace.iter().zip(&c.trace).position(|(a, b)| a != b).unwrap_or(r.trace.len().min(c.trace.len()));
        let show = |t: &[super::Event]| t.get(at).map(|e| e.to_string()).unwrap_or_else(|| "<end>".into());
        return Verdict::Differ(format!("traces differ at event {at}: {} vs {}", show(&r.trace), show(&c.trace)));
    }
    Verdict::Agree
}

/// Random argument for a parameter of type `ty`. Integers are drawn mostly
/// from a small range so loop bounds stay short, with occasional values of
/// full width.
pub fn sample_value(ty: &Type, rng: &mut impl Rng) -> Value {
    match ty {
        Type::Int(1) => Value::int(1, rng.gen_range(0..2)),
        Type::Int(w) => {
            let v = match rng.gen_range(0..10) {
                0..=6 => rng.gen_range(-4..25),
                7 | 8 => rng.gen_range(-1000..1000),
                _ => rng.gen(),
            };
            Value::int(*w, v)
        }
        Type::F64 => Value::F64(match rng.gen_range(0..4) {
            0 => rng.gen_range(-8..9) as f64,
            _ => rng.gen_range(-100.0..100.0),
        }),
        other => Value::zero(other),
    }
}

pub fn sample_args(params: &[Type], rng: &mut impl Rng) -> Vec<Value> {
    params.iter().map(|t| sample_value(t, rng)).collect()
}

/// Exported functions whose parameters can be sampled (integers and floats).
pub fn testable_exports(m: &Module) -> Vec<(String, Vec<Type>)> {
    m.functions
        .iter()
        .filter(|f| f.exported && f.body.is_some())
        .map(|f| (f.name.clone(), f.params.iter().map(|p| p.1.clone()).collect::<Vec<_>>()))
        .filter(|(_, ps)| ps.iter().all(|t| matches!(t, Type::Int(_) | Type::F64)))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub agreed: usize,
    pub skipped: usize,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.agreed += o.agreed;
        self.skipped += o.skipped;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub function: String,
    pub args: Vec<Value>,
    pub detail: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "@{}({}): {}", self.function, args.join(", "), self.detail)
    }
}

/// Candidate evaluator: export name, arguments and fuel.
pub type Evaluator<'a> = dyn FnMut(&str, &[Value], u64) -> Result<Run, Trap> + 'a;

/// Compare `candidate` with the source interpreter on `samples` random
/// inputs per testable export of `m`.
pub fn check_module(m: &Module, samples: usize, seed: u64, candidate: &mut Evaluator<'_>) -> Result<Tally, Mismatch> {
    let mut tally = Tally::default();
    for (i, (name, params)) in testable_exports(m).into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for _ in 0..samples {
            let args = sample_args(&params, &mut rng);
            let reference = eval_cfg(m, &name, &args, DEFAULT_FUEL);
            if reference.is_err() {
                tally.skipped += 1;
                continue;
            }
            let got = candidate(&name, &args, DEFAULT_FUEL * FUEL_FACTOR);
            match compare(&reference, &got) {
                Verdict::Agree => tally.agreed += 1,
                Verdict::Skipped(_) => tally.skipped += 1,
                Verdict::Differ(detail) => return Err(Mismatch { function: name, args, detail }),
            }
        }
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{Event, Value};

    #[test]
    fn verdicts() {
        let a = Ok(Run { result: Some(Value::i64(1)), trace: vec![] });
        let b = Ok(Run { result: Some(Value::i64(1)), trace: vec![Event::Call("x".into())] });
        assert_eq!(compare(&a, &a), Verdict::Agree);
        assert!(compare(&a, &b).is_failure());
        assert_eq!(compare(&Err(Trap::DivByZero), &b), Verdict::Skipped(Trap::DivByZero));
        assert!(compare(&a, &Err(Trap::OutOfFuel)).is_failure());
    }
}

//! Behaviour of external functions.
//!
//! A few names have built-in meaning (`print_i64`, `print_f64`, `puts`,
//! `ext_mix`). Any other external records a call event and returns the zero
//! of its declared result type.

use super::{Event, Machine, Trap, Value};
use crate::types::Type;

pub fn call_external(name: &str, args: &[Value], ret: Option<&Type>, m: &mut Machine) -> Result<Option<Value>, Trap> {
    m.tick()?;
    match name {
        "print_i64" | "print_f64" | "puts" => {
            let shown: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            m.trace.push(Event::Io(format!("{name} {}", shown.join(", "))));
            Ok(ret.map(Value::zero))
        }
        "ext_mix" => {
            m.trace.push(Event::Call(name.to_string()));
            let a = args.first().and_then(Value::as_i64).unwrap_or(0);
            let b = args.get(1).and_then(Value::as_i64).unwrap_or(0);
            let v = Value::i64(a.wrapping_mul(31) ^ b);
            match ret {
                Some(t) if v.has_type(t) => Ok(Some(v)),
                Some(t) => Ok(Some(Value::zero(t))),
                None => Ok(None),
            }
        }
        "" => Err(Trap::Unresolved("<null>".into())),
        _ => {
            m.trace.push(Event::Call(name.to_string()));
            Ok(ret.map(Value::zero))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_records_io() {
        let mut m = Machine::new(10);
        let r = call_external("print_i64", &[Value::i64(-3)], None, &mut m).unwrap();
        assert_eq!(r, None);
        assert_eq!(m.trace, vec![Event::Io("print_i64 i64 -3".into())]);
    }

    #[test]
    fn mix_is_deterministic() {
        let mut m = Machine::new(10);
        let r = call_external("ext_mix", &[Value::i64(2), Value::i64(5)], Some(&Type::Int(64)), &mut m).unwrap();
        assert_eq!(r, Some(Value::i64(62 ^ 5)));
        assert_eq!(m.trace, vec![Event::Call("ext_mix".into())]);
    }
}

//! Canonical printer for the source IR.

use super::*;
use crate::graph::ops::sext;
use std::fmt::Write;

pub fn operand(o: &Operand) -> String {
    match o {
        Operand::Var(v) => format!("%{v}"),
        Operand::Sym(s) => format!("@{s}"),
        Operand::Int(i) => i.to_string(),
        Operand::Float(f) => format!("{f:?}"),
        Operand::Undef => "undef".into(),
    }
}

fn ret_type(t: &Option<Type>) -> String {
    t.as_ref().map(|t| t.to_string()).unwrap_or_else(|| "void".into())
}

pub fn inst(i: &Inst) -> String {
    let mut s = String::new();
    if let Some(d) = &i.dst {
        let _ = write!(s, "%{d} = ");
    }
    let o = operand;
    match &i.kind {
        InstKind::Bin(b, t, a, c) => {
            let _ = write!(s, "{} {t} {}, {}", b.name(), o(a), o(c));
        }
        InstKind::Neg(t, a) => {
            let _ = write!(s, "neg {t} {}", o(a));
        }
        InstKind::Cmp(c, t, a, b) => {
            let _ = write!(s, "{} {t} {}, {}", c.name(), o(a), o(b));
        }
        InstKind::Copy(t, a) => {
            let _ = write!(s, "copy {t} {}", o(a));
        }
        InstKind::Match(t, x, table) => {
            let width = match t {
                Type::Int(w) => *w,
                _ => 64,
            };
            let cases: Vec<String> = table.cases.iter().map(|(v, a)| format!("{} -> {a}", sext(width, *v))).collect();
            let _ = write!(s, "match {t} {}, [{}] default {}", o(x), cases.join(", "), table.default);
            let implied = table.cases.iter().map(|(_, a)| *a).chain([table.default]).max().unwrap() + 1;
            if implied != table.k {
                let _ = write!(s, ", k {}", table.k);
            }
        }
        InstKind::Alloca(t, n) => {
            let _ = write!(s, "alloca {t}, {n}");
        }
        InstKind::Load(t, p) => {
            let _ = write!(s, "load {t} {}", o(p));
        }
        InstKind::Store(t, v, p) => {
            let _ = write!(s, "store {t} {}, {}", o(v), o(p));
        }
        InstKind::Gep(t, b, x) => {
            let _ = write!(s, "gep {t} {}, {}", o(b), o(x));
        }
        InstKind::Call { ret, callee, args } => {
            let args: Vec<String> = args.iter().map(|(t, a)| format!("{t} {}", o(a))).collect();
            let _ = write!(s, "call {} {}({})", ret_type(ret), o(callee), args.join(", "));
        }
    }
    s
}

pub fn term(t: &Term) -> String {
    match t {
        Term::Br(l) => format!("br label %{l}"),
        Term::Branch(ty, op, ts) => {
            let ts: Vec<String> = ts.iter().map(|t| format!("%{t}")).collect();
            format!("branch {ty} {}, [{}]", operand(op), ts.join(", "))
        }
        Term::Ret(None) => "ret".into(),
        Term::Ret(Some(o)) => format!("ret {}", operand(o)),
    }
}

pub fn print_cfg(cfg: &Cfg, out: &mut String) {
    for b in &cfg.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for p in &b.phis {
            let inc: Vec<String> = p.incoming.iter().map(|(o, l)| format!("[{}, %{l}]", operand(o))).collect();
            let _ = writeln!(out, "  %{} = phi {} {}", p.dst, p.ty, inc.join(", "));
        }
        for i in &b.insts {
            let _ = writeln!(out, "  {}", inst(i));
        }
        let _ = writeln!(out, "  {}", term(&b.term));
    }
}

pub fn print_function(f: &Function, out: &mut String) {
    match &f.body {
        None => {
            let _ = writeln!(out, "external @{} : {}", f.name, f.fn_type());
        }
        Some(cfg) => {
            let params: Vec<String> = f.params.iter().map(|(n, t)| format!("{t} %{n}")).collect();
            let export = if f.exported { "export " } else { "" };
            let _ = writeln!(out, "{export}define {} @{}({}) {{", ret_type(&f.ret), f.name, params.join(", "));
            print_cfg(cfg, out);
            out.push_str("}\n");
        }
    }
}

/// Render a module in canonical form: globals first, then functions.
pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    let mut first = true;
    for g in &m.globals {
        if !first {
            out.push('\n');
        }
        first = false;
        match &g.init {
            None => {
                let _ = writeln!(out, "external @{} : {}", g.name, g.ty);
            }
            Some(cfg) => {
                let export = if g.exported { "export " } else { "" };
                let _ = writeln!(out, "{export}global {} @{} = {{", g.ty, g.name);
                print_cfg(cfg, &mut out);
                out.push_str("}\n");
            }
        }
    }
    for f in &m.functions {
        if !first {
            out.push('\n');
        }
        first = false;
        print_function(f, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse;

    const GCD: &str = "export define i64 @gcd(i64 %a, i64 %b) {
entry:
  br label %head
head:
  %c = ne i64 %b, 0
  branch i1 %c, [%done, %body]
body:
  %t = rem i64 %a, %b
  %a = copy i64 %b
  %b = copy i64 %t
  br label %head
done:
  ret %a
}
";

    #[test]
    fn canonical_text_is_a_fixpoint() {
        let m = parse(GCD).unwrap();
        let text = print_module(&m);
        assert_eq!(text, GCD);
        assert_eq!(parse(&text).unwrap(), m);
    }

    #[test]
    fn literals_round_trip() {
        let src = "define f64 @f(f64 %x) {\nentry:\n  %a = add f64 %x, 1.5\n  %b = mul f64 %a, -2e300\n  %m = match i8 -1, [-1 -> 1] default 0\n  ret %b\n}\n";
        let m = parse(src).unwrap();
        assert_eq!(print_module(&m), src);
    }
}

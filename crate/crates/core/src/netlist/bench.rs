//! ISCAS BENCH reader and writer.
//!
//! Grammar: `#` starts a comment, `INPUT(w)`, `OUTPUT(w)`, and
//! `w = KIND(a, b, ...)`. Names match `[A-Za-z0-9_.\[\]]+`, gate kinds are
//! case-insensitive, and LF or CRLF line endings are accepted.

use std::fmt::Write as _;

use super::{Circuit, CircuitBuilder, Driver, GateKind, NetlistError};

pub fn parse_bench(text: &str) -> Result<Circuit, NetlistError> {
    parse_bench_named(text, "circuit")
}

pub fn parse_bench_named(text: &str, name: &str) -> Result<Circuit, NetlistError> {
    let mut b = CircuitBuilder::new(name);
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let line = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: &str| NetlistError::Syntax { line: line_no, message: message.to_string() };

        if let Some((lhs, rhs)) = line.split_once('=') {
            let out = lhs.trim();
            check_name(out).map_err(|m| syntax(&m))?;
            let (kind_str, args) = split_call(rhs.trim()).ok_or_else(|| syntax("expected KIND(args)"))?;
            let kind = match GateKind::from_name(kind_str) {
                Some(k) => k,
                None if is_sequential(kind_str) => {
                    return Err(NetlistError::Unsupported { line: line_no, construct: kind_str.to_string() })
                }
                None => return Err(syntax(&format!("unknown gate kind `{kind_str}`"))),
            };
            let args = split_args(args).map_err(|m| syntax(&m))?;
            if !kind.arity_ok(args.len()) {
                return Err(syntax(&format!("{kind} cannot take {} input(s)", args.len())));
            }
            b.gate_at(out, kind, args, Some(line_no));
        } else {
            let (kw, args) = split_call(line).ok_or_else(|| syntax("expected INPUT(..), OUTPUT(..) or assignment"))?;
            let args = split_args(args).map_err(|m| syntax(&m))?;
            if args.len() != 1 {
                return Err(syntax("expected exactly one wire name"));
            }
            match kw.to_ascii_uppercase().as_str() {
                "INPUT" => b.input_at(args[0], Some(line_no)),
                "OUTPUT" => b.output_at(args[0], Some(line_no)),
                other => return Err(syntax(&format!("unknown declaration `{other}`"))),
            };
        }
    }
    b.build()
}

/// Writes `c` as BENCH text: inputs, then outputs, then gates in topological order.
pub fn emit_bench(c: &Circuit) -> String {
    let mut s = String::new();
    for name in c.input_names() {
        let _ = writeln!(s, "INPUT({name})");
    }
    for name in c.output_names() {
        let _ = writeln!(s, "OUTPUT({name})");
    }
    for w in c.wires() {
        if let Driver::Gate { kind, fanin } = &w.driver {
            let args: Vec<&str> = fanin.iter().map(|&f| c.wire_name(f)).collect();
            let _ = writeln!(s, "{} = {}({})", w.name, kind, args.join(", "));
        }
    }
    s
}

fn is_sequential(kind: &str) -> bool {
    matches!(kind.to_ascii_uppercase().as_str(), "DFF" | "DFFR" | "LATCH")
}

fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    let head = s[..open].trim();
    if head.is_empty() {
        return None;
    }
    Some((head, inner))
}

fn split_args(s: &str) -> Result<Vec<&str>, String> {
    let args: Vec<&str> = s.split(',').map(str::trim).collect();
    for a in &args {
        check_name(a)?;
    }
    Ok(args)
}

fn check_name(name: &str) -> Result<(), String> {
    let valid = !name.is_empty()
        && name.chars().all(|ch| ch.is_ascii_alphanumeric() || matches!(ch, '_' | '.' | '[' | ']'));
    if valid {
        Ok(())
    } else {
        Err(format!("invalid wire name `{name}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_document() {
        let c = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a,b)").unwrap();
        assert_eq!(c.num_inputs(), 2);
        assert_eq!(c.gate_count(), 1);
        assert_eq!(emit_bench(&c).lines().count(), 4);
    }

    #[test]
    fn accepts_crlf_comments_and_case() {
        let c = parse_bench("# c\r\nINPUT(a) # x\r\ninput(b)\r\nOUTPUT(y)\r\ny = nand( a , b )\r\n").unwrap();
        assert_eq!(c.output_names(), vec!["y"]);
    }

    #[test]
    fn undefined_wire_reports_line() {
        let err = parse_bench("y = AND(a,b)").unwrap_err();
        assert_eq!(err, NetlistError::UndefinedWire { name: "a".into(), line: Some(1) });
        let err = parse_bench("INPUT(a)\nOUTPUT(z)").unwrap_err();
        assert!(matches!(err, NetlistError::UndefinedWire { line: Some(2), .. }));
    }

    #[test]
    fn rejects_duplicates_cycles_and_dff() {
        assert!(matches!(
            parse_bench("INPUT(a)\nINPUT(a)"),
            Err(NetlistError::DuplicateDefinition { line: Some(2), .. })
        ));
        assert!(matches!(
            parse_bench("INPUT(a)\nOUTPUT(x)\nx = AND(a, y)\ny = NOT(x)"),
            Err(NetlistError::Cycle(_))
        ));
        assert!(matches!(
            parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(a)"),
            Err(NetlistError::Unsupported { line: 3, .. })
        ));
        assert!(matches!(parse_bench("INPUT(a b)"), Err(NetlistError::Syntax { line: 1, .. })));
        assert!(matches!(parse_bench("INPUT(a)\ny = FOO(a, a)"), Err(NetlistError::Syntax { line: 2, .. })));
        assert!(matches!(parse_bench("INPUT(a)\ny = NOT(a, a)"), Err(NetlistError::Syntax { line: 2, .. })));
    }

    #[test]
    fn constants_use_reserved_zero() {
        let c = parse_bench("INPUT(a)\nOUTPUT(y)\none = NOT(__zero)\ny = AND(a, one)").unwrap();
        assert!(c.zero_wire().is_some());
        assert!(matches!(parse_bench("INPUT(__zero)"), Err(NetlistError::ReservedName(_))));
        let text = emit_bench(&c);
        assert!(!text.contains("INPUT(__zero)"));
        assert_eq!(parse_bench(&text).unwrap(), c);
    }

    #[test]
    fn passthrough_emits_buf_line() {
        let c = parse_bench("INPUT(a)\nOUTPUT(a)").unwrap();
        let text = emit_bench(&c);
        assert!(text.contains("a_po = BUF(a)"), "{text}");
        assert_eq!(parse_bench(&text).unwrap(), c);
    }
}

//! Text format for bond-graph models.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! sf <name>                    flow source (pump)
//! c  <name> <value>            capacitance (tank)
//! r  <name> <value>            resistance (valve)
//! zero <name>                  0-junction, common effort
//! one  <name>                  1-junction, common flow
//! bond <tail> <head>           power bond, arrow from tail to head
//! effort <sensor> <junction>   pressure sensor on a 0-junction
//! flow   <sensor> <junction>   flow sensor on a 1-junction
//! ```
//!
//! Errors carry the offending line number; model-level problems found
//! after the last line (such as an isolated junction) carry none.

use thiserror::Error;

use super::{BondGraphModel, ModelError};

#[derive(Debug, Error)]
pub enum ModelParseError {
    #[error("line {line}: element kind `{kind}` is not supported (use sf, c, or r)")]
    UnsupportedElement { line: usize, kind: String },
    #[error("line {line}: unknown directive `{directive}`")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}: `{directive}` takes {expected}, found {found}")]
    BadArity {
        line: usize,
        directive: String,
        expected: &'static str,
        found: usize,
    },
    #[error("line {line}: `{value}` is not a valid number")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: unknown node `{name}`")]
    UnknownNode { line: usize, name: String },
    #[error("line {line}: {source}")]
    Rejected { line: usize, source: ModelError },
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

pub fn parse_model(text: &str) -> Result<BondGraphModel, ModelParseError> {
    let mut model = BondGraphModel::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let directive = words.next().unwrap();
        let args: Vec<&str> = words.collect();

        let arity = |n: usize, expected: &'static str| -> Result<(), ModelParseError> {
            if args.len() == n {
                Ok(())
            } else {
                Err(ModelParseError::BadArity {
                    line,
                    directive: directive.to_string(),
                    expected,
                    found: args.len(),
                })
            }
        };
        let rejected = |source: ModelError| ModelParseError::Rejected { line, source };

        match directive {
            "sf" => {
                arity(1, "one name")?;
                model.add_flow_source(args[0]).map_err(rejected)?;
            }
            "c" => {
                arity(2, "a name and a value")?;
                let value = parse_value(line, args[1])?;
                model.add_capacitance(args[0], value).map_err(rejected)?;
            }
            "r" => {
                arity(2, "a name and a value")?;
                let value = parse_value(line, args[1])?;
                model.add_resistance(args[0], value).map_err(rejected)?;
            }
            "zero" => {
                arity(1, "one name")?;
                model.add_zero_junction(args[0]).map_err(rejected)?;
            }
            "one" => {
                arity(1, "one name")?;
                model.add_one_junction(args[0]).map_err(rejected)?;
            }
            "bond" => {
                arity(2, "a tail and a head")?;
                let tail = resolve(&model, line, args[0])?;
                let head = resolve(&model, line, args[1])?;
                model.add_bond(tail, head);
            }
            "effort" => {
                arity(2, "a sensor name and a junction")?;
                let junction = resolve(&model, line, args[1])?;
                model.add_effort_sensor(args[0], junction).map_err(rejected)?;
            }
            "flow" => {
                arity(2, "a sensor name and a junction")?;
                let junction = resolve(&model, line, args[1])?;
                model.add_flow_sensor(args[0], junction).map_err(rejected)?;
            }
            "se" | "i" | "tf" | "gy" | "mtf" | "mgy" => {
                return Err(ModelParseError::UnsupportedElement {
                    line,
                    kind: directive.to_string(),
                })
            }
            other => {
                return Err(ModelParseError::UnknownDirective {
                    line,
                    directive: other.to_string(),
                })
            }
        }
    }

    model.validate()?;
    Ok(model)
}

fn parse_value(line: usize, text: &str) -> Result<f64, ModelParseError> {
    text.parse::<f64>().map_err(|_| ModelParseError::BadNumber {
        line,
        value: text.to_string(),
    })
}

fn resolve(model: &BondGraphModel, line: usize, name: &str) -> Result<usize, ModelParseError> {
    model.lookup(name).ok_or_else(|| ModelParseError::UnknownNode {
        line,
        name: name.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bondgraph::{assign_causality, derive_state_equations, three_tank, TankParams};
    use approx::assert_relative_eq;

    const RIG: &str = include_str!("../../examples/three_tank.bg");

    #[test]
    fn shipped_description_matches_the_builder() {
        let parsed = parse_model(RIG).unwrap();
        assert_eq!(parsed.nodes.len(), 14);
        assert_eq!(parsed.bonds.len(), 13);
        assert_eq!(parsed.sensors.len(), 5);

        let built = three_tank(&TankParams::default()).unwrap();
        let ss_parsed = {
            let ca = assign_causality(&parsed).unwrap();
            derive_state_equations(&parsed, &ca).unwrap()
        };
        let ss_built = {
            let ca = assign_causality(&built).unwrap();
            derive_state_equations(&built, &ca).unwrap()
        };
        assert_relative_eq!(ss_parsed.a, ss_built.a, epsilon = 1e-12);
        assert_relative_eq!(ss_parsed.b, ss_built.b, epsilon = 1e-12);
        assert_relative_eq!(ss_parsed.c, ss_built.c, epsilon = 1e-12);
        assert_relative_eq!(ss_parsed.d, ss_built.d, epsilon = 1e-12);
        assert_eq!(ss_parsed.output_names, ss_built.output_names);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let model = parse_model(
            "# a pump filling a tank\n\
             sf P        # the pump\n\
             c T 2.5\n\
             \n\
             zero j\n\
             bond P j    # power in\n\
             bond j T\n\
             effort y j\n",
        )
        .unwrap();
        assert_eq!(model.nodes.len(), 3);
        assert_eq!(model.bonds.len(), 2);
        assert_eq!(model.sensors.len(), 1);
    }

    #[test]
    fn transformer_style_elements_are_rejected() {
        for (text, kind) in [
            ("se E", "se"),
            ("i L 1.0", "i"),
            ("tf T 2.0", "tf"),
            ("gy G 0.5", "gy"),
        ] {
            match parse_model(text).unwrap_err() {
                ModelParseError::UnsupportedElement { line: 1, kind: k } => assert_eq!(k, kind),
                other => panic!("unexpected error for `{text}`: {other}"),
            }
        }
    }

    #[test]
    fn unknown_directives_are_flagged_with_their_line() {
        match parse_model("zero j\npipe j k\n").unwrap_err() {
            ModelParseError::UnknownDirective { line, directive } => {
                assert_eq!(line, 2);
                assert_eq!(directive, "pipe");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn arity_and_number_errors() {
        assert!(matches!(
            parse_model("c C1").unwrap_err(),
            ModelParseError::BadArity { line: 1, .. }
        ));
        match parse_model("c C1 fast").unwrap_err() {
            ModelParseError::BadNumber { line: 1, value } => assert_eq!(value, "fast"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn bonds_must_reference_declared_nodes() {
        match parse_model("zero j\nbond j missing\n").unwrap_err() {
            ModelParseError::UnknownNode { line, name } => {
                assert_eq!(line, 2);
                assert_eq!(name, "missing");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn builder_rejections_keep_the_line_number() {
        match parse_model("zero j\nzero j\n").unwrap_err() {
            ModelParseError::Rejected { line, source } => {
                assert_eq!(line, 2);
                assert!(matches!(source, ModelError::DuplicateName(_)));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn model_level_validation_still_runs() {
        match parse_model("zero lonely\n").unwrap_err() {
            ModelParseError::Invalid(ModelError::IsolatedJunction(name)) => {
                assert_eq!(name, "lonely")
            }
            other => panic!("unexpected error: {other}"),
        }
    }
}

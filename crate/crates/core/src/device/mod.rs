//! Line-oriented serial protocol of the robot, plus the mock firmware.
//!
//! The wire format is single-letter opcodes with space-separated fields
//! fixed to two decimals, newline-terminated ASCII:
//!
//! ```text
//! -> G <x> <y> <z>     move effector to x-y-z (mm)
//! -> A <a> <b> <c>     set shoulder angles directly (deg)
//! -> P                 read the potentiometer
//! -> H                 home and reset the task
//! <- OK
//! <- ERR <UNREACHABLE|OUT_OF_WORKSPACE|BAD_CMD>
//! <- POT <0..1023>
//! ```
//!
//! Parsing is tolerant of repeated spaces and a missing trailing newline;
//! anything else malformed yields a typed error, never a panic.

mod firmware;

pub use firmware::{
    ClientError, DeviceClient, InProcessTransport, LineTransport, MockFirmware, RobotImperfection,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("bad command line: {0:?}")]
    BadCommand(String),
    #[error("bad response line: {0:?}")]
    BadResponse(String),
}

/// A host-to-robot command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    GotoXyz { x: f64, y: f64, z: f64 },
    SetAngles { a: f64, b: f64, c: f64 },
    ReadPot,
    Home,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrCode {
    Unreachable,
    OutOfWorkspace,
    BadCmd,
}

impl ErrCode {
    fn as_str(&self) -> &'static str {
        match self {
            ErrCode::Unreachable => "UNREACHABLE",
            ErrCode::OutOfWorkspace => "OUT_OF_WORKSPACE",
            ErrCode::BadCmd => "BAD_CMD",
        }
    }
}

/// A robot-to-host response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    Ok,
    Err(ErrCode),
    Pot(u16),
}

pub fn encode_command(c: &Command) -> String {
    match c {
        Command::GotoXyz { x, y, z } => format!("G {x:.2} {y:.2} {z:.2}\n"),
        Command::SetAngles { a, b, c } => format!("A {a:.2} {b:.2} {c:.2}\n"),
        Command::ReadPot => "P\n".to_string(),
        Command::Home => "H\n".to_string(),
    }
}

fn parse_f64(tok: &str, line: &str) -> Result<f64, ProtocolError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| ProtocolError::BadCommand(line.to_string()))?;
    if !v.is_finite() {
        return Err(ProtocolError::BadCommand(line.to_string()));
    }
    Ok(v)
}

pub fn parse_command(line: &str) -> Result<Command, ProtocolError> {
    let toks: Vec<&str> = line.trim_end_matches(['\n', '\r']).split_whitespace().collect();
    let bad = || ProtocolError::BadCommand(line.to_string());
    match toks.as_slice() {
        ["G", x, y, z] => Ok(Command::GotoXyz {
            x: parse_f64(x, line)?,
            y: parse_f64(y, line)?,
            z: parse_f64(z, line)?,
        }),
        ["A", a, b, c] => Ok(Command::SetAngles {
            a: parse_f64(a, line)?,
            b: parse_f64(b, line)?,
            c: parse_f64(c, line)?,
        }),
        ["P"] => Ok(Command::ReadPot),
        ["H"] => Ok(Command::Home),
        _ => Err(bad()),
    }
}

pub fn encode_response(r: &Response) -> String {
    match r {
        Response::Ok => "OK\n".to_string(),
        Response::Err(code) => format!("ERR {}\n", code.as_str()),
        Response::Pot(v) => format!("POT {v}\n"),
    }
}

pub fn parse_response(line: &str) -> Result<Response, ProtocolError> {
    let toks: Vec<&str> = line.trim_end_matches(['\n', '\r']).split_whitespace().collect();
    let bad = || ProtocolError::BadResponse(line.to_string());
    match toks.as_slice() {
        ["OK"] => Ok(Response::Ok),
        ["ERR", code] => match *code {
            "UNREACHABLE" => Ok(Response::Err(ErrCode::Unreachable)),
            "OUT_OF_WORKSPACE" => Ok(Response::Err(ErrCode::OutOfWorkspace)),
            "BAD_CMD" => Ok(Response::Err(ErrCode::BadCmd)),
            _ => Err(bad()),
        },
        ["POT", v] => {
            let v: u16 = v.parse().map_err(|_| bad())?;
            if v > crate::dial_env::ADC_MAX {
                return Err(bad());
            }
            Ok(Response::Pot(v))
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_command_lines() {
        assert_eq!(
            encode_command(&Command::GotoXyz {
                x: 10.0,
                y: -5.0,
                z: -55.0
            }),
            "G 10.00 -5.00 -55.00\n"
        );
        assert_eq!(encode_command(&Command::ReadPot), "P\n");
        assert_eq!(encode_command(&Command::Home), "H\n");
        assert_eq!(
            encode_command(&Command::SetAngles {
                a: 0.0,
                b: 12.5,
                c: -3.25
            }),
            "A 0.00 12.50 -3.25\n"
        );
    }

    #[test]
    fn parse_tolerates_spacing_and_missing_newline() {
        assert_eq!(
            parse_command("G 0.00 0.00 -55.00\n").unwrap(),
            Command::GotoXyz {
                x: 0.0,
                y: 0.0,
                z: -55.0
            }
        );
        assert_eq!(parse_command("P").unwrap(), Command::ReadPot);
        assert_eq!(
            parse_command("  G   1.00    2.00  3.00  ").unwrap(),
            Command::GotoXyz {
                x: 1.0,
                y: 2.0,
                z: 3.0
            }
        );
    }

    #[test]
    fn malformed_commands_are_typed_errors() {
        for line in ["Q 1 2", "", "G 1 2", "G a b c", "G 1 2 3 4", "g 1 2 3", "G 1 2 inf"] {
            assert!(
                matches!(parse_command(line), Err(ProtocolError::BadCommand(_))),
                "{line:?}"
            );
        }
    }

    #[test]
    fn golden_response_lines() {
        assert_eq!(encode_response(&Response::Pot(512)), "POT 512\n");
        assert_eq!(encode_response(&Response::Ok), "OK\n");
        assert_eq!(
            encode_response(&Response::Err(ErrCode::OutOfWorkspace)),
            "ERR OUT_OF_WORKSPACE\n"
        );
        assert_eq!(
            parse_response("ERR UNREACHABLE\n").unwrap(),
            Response::Err(ErrCode::Unreachable)
        );
    }

    #[test]
    fn out_of_range_pot_is_rejected() {
        assert!(matches!(
            parse_response("POT 2000\n"),
            Err(ProtocolError::BadResponse(_))
        ));
        assert_eq!(parse_response("POT 1023").unwrap(), Response::Pot(1023));
    }

    fn arb_command() -> impl Strategy<Value = Command> {
        // two-decimal grid values round-trip exactly through the codec
        let coord = (-9999i32..=9999).prop_map(|v| v as f64 / 100.0);
        prop_oneof![
            (coord.clone(), coord.clone(), coord.clone())
                .prop_map(|(x, y, z)| Command::GotoXyz { x, y, z }),
            (coord.clone(), coord.clone(), coord)
                .prop_map(|(a, b, c)| Command::SetAngles { a, b, c }),
            Just(Command::ReadPot),
            Just(Command::Home),
        ]
    }

    proptest! {
        #[test]
        fn command_codec_round_trips(c in arb_command()) {
            let line = encode_command(&c);
            prop_assert_eq!(parse_command(&line).unwrap(), c);
            // encoding is bit-stable through a second round
            prop_assert_eq!(encode_command(&parse_command(&line).unwrap()), line);
        }

        #[test]
        fn response_codec_round_trips(v in 0u16..=1023) {
            let r = Response::Pot(v);
            prop_assert_eq!(parse_response(&encode_response(&r)).unwrap(), r);
        }

        #[test]
        fn parser_never_panics(line in "\\PC*") {
            let _ = parse_command(&line);
            let _ = parse_response(&line);
        }
    }
}

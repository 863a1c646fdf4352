//! Reference external PES speaking the line protocol of
//! `pins::potentials::external`.
//!
//! Usage: `pins-ref-pes [MODE]` where MODE is one of
//!
//! * `gaussian` (default): `|x|^2 / 2`
//! * `zero`: always 0
//! * `err-eval`: answers every EVAL with `ERR`
//! * `garbage`: returns a non-numeric energy
//! * `hang`: never answers an EVAL
//! * `exit`: exits after the handshake
//! * `short`: returns one energy fewer than requested, then stalls

use std::io::{self, BufRead, Write};

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Gaussian,
    Zero,
    ErrEval,
    Garbage,
    Hang,
    Exit,
    Short,
}

fn parse_mode(s: &str) -> Option<Mode> {
    Some(match s {
        "gaussian" => Mode::Gaussian,
        "zero" => Mode::Zero,
        "err-eval" => Mode::ErrEval,
        "garbage" => Mode::Garbage,
        "hang" => Mode::Hang,
        "exit" => Mode::Exit,
        "short" => Mode::Short,
        _ => return None,
    })
}

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "gaussian".into());
    let Some(mode) = parse_mode(&arg) else {
        eprintln!("pins-ref-pes: unknown mode {arg:?}");
        std::process::exit(2);
    };
    if let Err(e) = serve(mode) {
        eprintln!("pins-ref-pes: {e}");
        std::process::exit(1);
    }
}

fn serve(mode: Mode) -> io::Result<()> {
    let stdin = io::stdin();
    let mut input = stdin.lock().lines();
    let mut out = io::stdout().lock();
    let mut dim = None;

    while let Some(line) = input.next() {
        let line = line?;
        let mut words = line.split_whitespace();
        match (words.next(), words.next().and_then(|w| w.parse::<usize>().ok())) {
            (Some("HELLO"), Some(d)) if d > 0 => {
                dim = Some(d);
                writeln!(out, "OK")?;
                out.flush()?;
                if mode == Mode::Exit {
                    return Ok(());
                }
            }
            (Some("EVAL"), Some(n)) => {
                let Some(d) = dim else {
                    writeln!(out, "ERR EVAL before HELLO")?;
                    out.flush()?;
                    continue;
                };
                let mut energies = Vec::with_capacity(n);
                let mut bad = None;
                for _ in 0..n {
                    let row = input.next().transpose()?.unwrap_or_default();
                    let x: Vec<f64> = row.split_whitespace().filter_map(|w| w.parse().ok()).collect();
                    if x.len() != d {
                        bad = Some(format!("expected {d} coordinates, got {}", x.len()));
                    }
                    energies.push(match mode {
                        Mode::Zero => 0.0,
                        _ => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
                    });
                }
                if let Some(msg) = bad {
                    writeln!(out, "ERR {msg}")?;
                } else {
                    match mode {
                        Mode::ErrEval => writeln!(out, "ERR evaluation refused")?,
                        Mode::Garbage => {
                            writeln!(out, "OK")?;
                            for _ in 0..n {
                                writeln!(out, "not-a-number")?;
                            }
                        }
                        Mode::Hang => {
                            out.flush()?;
                            loop {
                                std::thread::park();
                            }
                        }
                        Mode::Short => {
                            writeln!(out, "OK")?;
                            for e in energies.iter().skip(1) {
                                writeln!(out, "{e:.17e}")?;
                            }
                            out.flush()?;
                            loop {
                                std::thread::park();
                            }
                        }
                        _ => {
                            writeln!(out, "OK")?;
                            for e in &energies {
                                writeln!(out, "{e:.17e}")?;
                            }
                        }
                    }
                }
                out.flush()?;
            }
            _ => {
                writeln!(out, "ERR unrecognized request {line:?}")?;
                out.flush()?;
            }
        }
    }
    Ok(())
}

//! Text format for pulse programs.
//!
//! ```text
//! 0.000       750.000 ! Initial and final time (ns)
//! ---------------Pulse definition block----------------------------
//! 4                   ! Number of pulses
//! 1                   ! Maximum number of frequencies
//! 0.000     200.000   ! Pulse 1 - times (ns)
//! 1.0                 ! Pulse 1 - toggle [amplitude scale]
//! 16.161              ! Pulse 1 - frequency (GHz)
//! 0.0                 ! Pulse 1 - phase (radians)
//! ...
//! ```
//!
//! Everything after `!` is a comment. With more than one frequency per
//! pulse, each frequency line is followed by its phase line. An optional
//! second number on the toggle line scales the drive amplitude.

use crate::error::{Error, Result};
use crate::pulse::{FrequencyComponent, PulseProgram, PulseSegment};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    TInitial,
    TFinal,
    PulseCount,
    MaxFrequencies,
    Start(usize),
    End(usize),
    Toggle(usize),
    Scale(usize),
    Omega(usize, usize),
    Phase(usize, usize),
}

#[derive(Debug, Clone)]
struct Span {
    line: usize,
    start: usize,
    end: usize,
    field: Field,
    value: f64,
}

/// A parsed pulse file that remembers its source text, so an unmodified
/// program renders back byte for byte.
#[derive(Debug, Clone)]
pub struct PulseDocument {
    lines: Vec<String>,
    trailing_newline: bool,
    spans: Vec<Span>,
    program: PulseProgram,
}

struct Token<'a> {
    text: &'a str,
    start: usize,
}

/// Data tokens of a line with comments removed.
fn tokens(line: &str) -> Vec<Token<'_>> {
    let data = match line.find('!') {
        Some(k) => &line[..k],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in data.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &data[s..i], start: s });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &data[s..], start: s });
    }
    out
}

fn parse_real(text: &str, line: usize) -> Result<f64> {
    let normalized = text.replace(['d', 'D'], "e");
    normalized
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(line, format!("malformed number '{text}'")))
}

fn parse_count(text: &str, line: usize) -> Result<usize> {
    text.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected a non-negative integer, found '{text}'")))
}

impl PulseDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let trailing_newline = text.ends_with('\n');
        let mut spans = Vec::new();
        // data lines: (1-based line number, tokens)
        let mut data = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            let toks = tokens(line);
            if !toks.is_empty() {
                data.push((k, toks));
            }
        }
        let mut cursor = data.into_iter();
        let mut next = |what: &str| {
            cursor
                .next()
                .ok_or_else(|| Error::parse(lines.len() + 1, format!("unexpected end of input: expected {what}")))
        };
        let expect_n = |toks: &[Token<'_>], line: usize, min: usize, max: usize, what: &str| {
            if toks.len() < min || toks.len() > max {
                Err(Error::parse(
                    line + 1,
                    format!("{what}: expected {min}..={max} values, found {}", toks.len()),
                ))
            } else {
                Ok(())
            }
        };
        let push = |spans: &mut Vec<Span>, line: usize, tok: &Token<'_>, field: Field, value: f64| {
            spans.push(Span {
                line,
                start: tok.start,
                end: tok.start + tok.text.len(),
                field,
                value,
            })
        };

        let (ln, toks) = next("initial and final time")?;
        expect_n(&toks, ln, 2, 2, "initial and final time")?;
        let t_initial = parse_real(toks[0].text, ln + 1)?;
        let t_final = parse_real(toks[1].text, ln + 1)?;
        push(&mut spans, ln, &toks[0], Field::TInitial, t_initial);
        push(&mut spans, ln, &toks[1], Field::TFinal, t_final);

        let (ln, toks) = next("separator line")?;
        if !(toks[0].text.starts_with("--") && toks[0].text.parse::<f64>().is_err()) {
            return Err(Error::parse(ln + 1, "expected the pulse block separator line"));
        }

        let (ln, toks) = next("number of pulses")?;
        expect_n(&toks, ln, 1, 1, "number of pulses")?;
        let n_pulses = parse_count(toks[0].text, ln + 1)?;
        push(&mut spans, ln, &toks[0], Field::PulseCount, n_pulses as f64);

        let (ln, toks) = next("maximum number of frequencies")?;
        expect_n(&toks, ln, 1, 1, "maximum number of frequencies")?;
        let max_frequencies = parse_count(toks[0].text, ln + 1)?;
        if max_frequencies == 0 {
            return Err(Error::parse(ln + 1, "maximum number of frequencies must be at least 1"));
        }
        push(&mut spans, ln, &toks[0], Field::MaxFrequencies, max_frequencies as f64);

        let mut segments = Vec::with_capacity(n_pulses);
        for p in 0..n_pulses {
            let (ln, toks) = next("pulse time window")?;
            expect_n(&toks, ln, 2, 2, "pulse time window")?;
            let t_start = parse_real(toks[0].text, ln + 1)?;
            let t_end = parse_real(toks[1].text, ln + 1)?;
            push(&mut spans, ln, &toks[0], Field::Start(p), t_start);
            push(&mut spans, ln, &toks[1], Field::End(p), t_end);

            let (ln, toks) = next("pulse toggle")?;
            expect_n(&toks, ln, 1, 2, "pulse toggle")?;
            let toggle = parse_real(toks[0].text, ln + 1)?;
            push(&mut spans, ln, &toks[0], Field::Toggle(p), toggle);
            let amplitude_scale = if toks.len() == 2 {
                let v = parse_real(toks[1].text, ln + 1)?;
                push(&mut spans, ln, &toks[1], Field::Scale(p), v);
                v
            } else {
                1.0
            };

            let mut frequencies = Vec::with_capacity(max_frequencies);
            for f in 0..max_frequencies {
                let (ln, toks) = next("pulse frequency")?;
                expect_n(&toks, ln, 1, 1, "pulse frequency")?;
                let omega = parse_real(toks[0].text, ln + 1)?;
                push(&mut spans, ln, &toks[0], Field::Omega(p, f), omega);
                let (ln, toks) = next("pulse phase")?;
                expect_n(&toks, ln, 1, 1, "pulse phase")?;
                let phase = parse_real(toks[0].text, ln + 1)?;
                push(&mut spans, ln, &toks[0], Field::Phase(p, f), phase);
                frequencies.push(FrequencyComponent { omega, phase });
            }
            segments.push(PulseSegment {
                t_start,
                t_end,
                toggle,
                frequencies,
                amplitude_scale,
            });
        }
        if let Some((ln, _)) = cursor.next() {
            return Err(Error::parse(ln + 1, "unexpected data after the last pulse"));
        }
        let program = PulseProgram {
            t_initial,
            t_final,
            max_frequencies,
            segments,
        };
        program.validate()?;
        Ok(PulseDocument {
            lines,
            trailing_newline,
            spans,
            program,
        })
    }

    pub fn program(&self) -> &PulseProgram {
        &self.program
    }

    /// The source text, byte for byte.
    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }

    /// Renders `program` into this document's layout, keeping comments and
    /// spacing. Values equal to the parsed ones keep their original text.
    /// Programs with a different shape fall back to
    /// [`serialize_pulse_program`].
    pub fn render_program(&self, program: &PulseProgram) -> Result<String> {
        program.validate()?;
        let same_shape = program.segments.len() == self.program.segments.len()
            && program.max_frequencies == self.program.max_frequencies
            && program
                .segments
                .iter()
                .all(|s| s.frequencies.len() == program.max_frequencies)
            && program
                .segments
                .iter()
                .enumerate()
                .all(|(k, s)| s.amplitude_scale == 1.0 || self.spans.iter().any(|x| x.field == Field::Scale(k)));
        if !same_shape {
            return serialize_pulse_program(program);
        }
        let mut lines = self.lines.clone();
        // replace right to left within a line so byte offsets stay valid
        let mut spans = self.spans.clone();
        spans.sort_by(|a, b| a.line.cmp(&b.line).then(b.start.cmp(&a.start)));
        for span in &spans {
            let value = field_value(program, span.field);
            if value.to_bits() != span.value.to_bits() {
                let text = match span.field {
                    Field::PulseCount | Field::MaxFrequencies => format!("{}", value as usize),
                    Field::TInitial | Field::TFinal | Field::Start(_) | Field::End(_) => format_number(value, 3),
                    _ => format_number(value, 1),
                };
                lines[span.line].replace_range(span.start..span.end, &text);
            }
        }
        let mut out = lines.join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        Ok(out)
    }
}

fn field_value(p: &PulseProgram, field: Field) -> f64 {
    match field {
        Field::TInitial => p.t_initial,
        Field::TFinal => p.t_final,
        Field::PulseCount => p.segments.len() as f64,
        Field::MaxFrequencies => p.max_frequencies as f64,
        Field::Start(k) => p.segments[k].t_start,
        Field::End(k) => p.segments[k].t_end,
        Field::Toggle(k) => p.segments[k].toggle,
        Field::Scale(k) => p.segments[k].amplitude_scale,
        Field::Omega(k, f) => p.segments[k].frequencies[f].omega,
        Field::Phase(k, f) => p.segments[k].frequencies[f].phase,
    }
}

/// Shortest fixed-point text with at least `min_decimals` decimals that
/// parses back to exactly `value`.
pub fn format_number(value: f64, min_decimals: usize) -> String {
    for decimals in min_decimals..=17 {
        let s = format!("{value:.decimals$}");
        if s.parse::<f64>().ok() == Some(value) {
            return s;
        }
    }
    format!("{value:e}")
}

pub fn parse_pulse_program(text: &str) -> Result<PulseProgram> {
    Ok(PulseDocument::parse(text)?.program)
}

/// Writes `program` in the pulse file format. Every pulse must carry exactly
/// `max_frequencies` components.
pub fn serialize_pulse_program(program: &PulseProgram) -> Result<String> {
    program.validate()?;
    let mut out = String::new();
    let pad = |data: String| format!("{data:<19} ");
    out.push_str(&format!(
        "{}! Initial and final time (ns)\n",
        pad(format!(
            "{}  {}",
            format_number(program.t_initial, 3),
            format_number(program.t_final, 3)
        ))
    ));
    out.push_str("---------------Pulse definition block----------------------------\n");
    out.push_str(&format!("{}! Number of pulses\n", pad(program.segments.len().to_string())));
    out.push_str(&format!(
        "{}! Maximum number of frequencies\n",
        pad(program.max_frequencies.to_string())
    ));
    for (k, s) in program.segments.iter().enumerate() {
        let n = k + 1;
        if s.frequencies.len() != program.max_frequencies {
            return Err(Error::Schedule {
                index: n,
                message: format!(
                    "has {} frequencies; the file format needs exactly {}",
                    s.frequencies.len(),
                    program.max_frequencies
                ),
            });
        }
        out.push_str(&format!(
            "{}! Pulse {n} - times (ns)\n",
            pad(format!("{}  {}", format_number(s.t_start, 3), format_number(s.t_end, 3)))
        ));
        let toggle = if s.amplitude_scale == 1.0 {
            format_number(s.toggle, 1)
        } else {
            format!("{}  {}", format_number(s.toggle, 1), format_number(s.amplitude_scale, 1))
        };
        let what = if s.is_driven() { "toggle" } else { "toggle (no driving)" };
        out.push_str(&format!("{}! Pulse {n} - {what}\n", pad(toggle)));
        for f in &s.frequencies {
            out.push_str(&format!("{}! Pulse {n} - pulse frequency (GHz)\n", pad(format_number(f.omega, 1))));
            out.push_str(&format!("{}! Pulse {n} - phase shift (radians)\n", pad(format_number(f.phase, 1))));
        }
    }
    Ok(out)
}

//! Result tables in the challenge reporting layout, emitted as plain text
//! (re-parseable) or as LaTeX table rows.

use std::fmt::Write as _;

use super::ProtocolError;

/// Whether a dataset side used original or anonymized speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Original,
    Anonymized,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Original => "o",
            Condition::Anonymized => "a",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "o" => Ok(Condition::Original),
            "a" => Ok(Condition::Anonymized),
            other => Err(format!("unknown condition {other:?} (want o|a)")),
        }
    }
}

/// One speaker-verification result row.
#[derive(Debug, Clone, PartialEq)]
pub struct AsvRow {
    pub dataset: String,
    pub enroll: Condition,
    pub trial: Condition,
    pub gender: String,
    pub eer_percent: f64,
    pub cllr_min: f64,
    pub cllr: f64,
    /// Score file the metrics were computed from.
    pub source: String,
}

/// One speech-recognition result row; `wer_percents` holds one value per
/// decoding configuration (the reference tables use two language models).
#[derive(Debug, Clone, PartialEq)]
pub struct WerRow {
    pub dataset: String,
    pub data: Condition,
    pub wer_percents: Vec<f64>,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    pub asv: Vec<AsvRow>,
    pub wer: Vec<WerRow>,
}

impl ResultsTable {
    pub fn is_empty(&self) -> bool {
        self.asv.is_empty() && self.wer.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Plain,
    Latex,
}

fn check_cell(cell: &str) -> Result<&str, ProtocolError> {
    if cell.is_empty() || cell.chars().any(char::is_whitespace) {
        return Err(ProtocolError::CellWhitespace(cell.to_string()));
    }
    Ok(cell)
}

fn latex_escape(s: &str) -> String {
    s.replace('_', "\\_")
}

/// Render the table. EER and Cllr cells use 3 decimals, WER cells 2,
/// matching the reference result tables digit for digit.
pub fn emit_results(table: &ResultsTable, format: TableFormat) -> Result<String, ProtocolError> {
    if table.is_empty() {
        return Err(ProtocolError::EmptyTable);
    }
    let mut out = String::new();
    match format {
        TableFormat::Plain => {
            if !table.asv.is_empty() {
                out.push_str("[asv]\n");
                out.push_str("# dataset enr trl gen eer_pct cllr_min cllr source\n");
                for row in &table.asv {
                    writeln!(
                        out,
                        "{} {} {} {} {:.3} {:.3} {:.3} {}",
                        check_cell(&row.dataset)?,
                        row.enroll.as_str(),
                        row.trial.as_str(),
                        check_cell(&row.gender)?,
                        row.eer_percent,
                        row.cllr_min,
                        row.cllr,
                        check_cell(&row.source)?,
                    )
                    .expect("string write");
                }
            }
            if !table.wer.is_empty() {
                out.push_str("[wer]\n");
                out.push_str("# dataset data wer_pct... source\n");
                for row in &table.wer {
                    let wers: Vec<String> =
                        row.wer_percents.iter().map(|w| format!("{w:.2}")).collect();
                    writeln!(
                        out,
                        "{} {} {} {}",
                        check_cell(&row.dataset)?,
                        row.data.as_str(),
                        wers.join(" "),
                        check_cell(&row.source)?,
                    )
                    .expect("string write");
                }
            }
        }
        TableFormat::Latex => {
            for row in &table.asv {
                writeln!(
                    out,
                    "{} & {:.3} & {:.3} & {:.3} & {} & {} & {} \\\\",
                    latex_escape(&row.dataset),
                    row.eer_percent,
                    row.cllr_min,
                    row.cllr,
                    row.enroll.as_str(),
                    row.trial.as_str(),
                    latex_escape(&row.gender),
                )
                .expect("string write");
            }
            for row in &table.wer {
                let wers: Vec<String> =
                    row.wer_percents.iter().map(|w| format!("{w:.2}")).collect();
                writeln!(
                    out,
                    "{} & {} & {} \\\\",
                    latex_escape(&row.dataset),
                    row.data.as_str(),
                    wers.join(" & "),
                )
                .expect("string write");
            }
        }
    }
    Ok(out)
}

/// Parse the plain emission format back into a table.
pub fn parse_results(text: &str) -> Result<ResultsTable, ProtocolError> {
    let mut table = ResultsTable::default();
    let mut section = "";
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[asv]" || line == "[wer]" {
            section = line;
            continue;
        }
        let parse_err = |reason: String| ProtocolError::Parse {
            file: "<results>".into(),
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section {
            "[asv]" => {
                if fields.len() != 8 {
                    return Err(parse_err(format!(
                        "expected 8 fields, got {}",
                        fields.len()
                    )));
                }
                let num = |s: &str| -> Result<f64, ProtocolError> {
                    s.parse().map_err(|_| ProtocolError::Parse {
                        file: "<results>".into(),
                        line: idx + 1,
                        reason: format!("bad number {s:?}"),
                    })
                };
                table.asv.push(AsvRow {
                    dataset: fields[0].to_string(),
                    enroll: fields[1].parse().map_err(parse_err)?,
                    trial: fields[2].parse().map_err(parse_err)?,
                    gender: fields[3].to_string(),
                    eer_percent: num(fields[4])?,
                    cllr_min: num(fields[5])?,
                    cllr: num(fields[6])?,
                    source: fields[7].to_string(),
                });
            }
            "[wer]" => {
                if fields.len() < 4 {
                    return Err(parse_err(format!(
                        "expected at least 4 fields, got {}",
                        fields.len()
                    )));
                }
                let mut wer_percents = Vec::new();
                for s in &fields[2..fields.len() - 1] {
                    wer_percents.push(s.parse().map_err(|_| ProtocolError::Parse {
                        file: "<results>".into(),
                        line: idx + 1,
                        reason: format!("bad number {s:?}"),
                    })?);
                }
                table.wer.push(WerRow {
                    dataset: fields[0].to_string(),
                    data: fields[1].parse().map_err(parse_err)?,
                    wer_percents,
                    source: fields[fields.len() - 1].to_string(),
                });
            }
            _ => return Err(parse_err("data before a [asv]/[wer] section header".into())),
        }
    }
    if table.is_empty() {
        return Err(ProtocolError::EmptyTable);
    }
    Ok(table)
}

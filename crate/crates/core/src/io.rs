//! Text file formats.
//!
//! | file | header / layout |
//! |------|-----------------|
//! | observations, dense ground truth | `user_id,element_id,score` |
//! | completed matrix | `user_id,element_id,score,provenance` |
//! | assignments | `user_id,element_id,score,source` |
//! | event log | `user_id,element_id,event_type` |
//! | element profiles | `element_id,achiever,explorer,socializer,killer` |
//! | model | `gdm-v1 <k> <m> <n>`, then `u <id> <k floats>` × m, `g <id> <k floats>` × n |
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so every format round-trips exactly. A completely empty
//! CSV file reads as zero records.

use std::io::{BufRead, Read, Write};

use crate::assign::{Assignment, AssignmentSource};
use crate::error::{Error, Result};
use crate::ingest::{EventRecord, EventType};
use crate::model::{
    DenseUtilityMatrix, DuplicatePolicy, ElementId, LatentFactorModel, Observation, SparseUtilityMatrix,
    UserId,
};
use crate::scalar::Scalar;
use crate::simulate::BARTLE_TYPES;
use crate::train::{CompletedMatrix, Provenance};

pub const OBSERVATION_HEADER: [&str; 3] = ["user_id", "element_id", "score"];
pub const COMPLETED_HEADER: [&str; 4] = ["user_id", "element_id", "score", "provenance"];
pub const ASSIGNMENT_HEADER: [&str; 4] = ["user_id", "element_id", "score", "source"];
pub const EVENT_HEADER: [&str; 3] = ["user_id", "element_id", "event_type"];
pub const MODEL_MAGIC: &str = "gdm-v1";

/// Reads CSV records after checking the header; yields `(line, fields)`.
fn read_records<R: Read>(reader: R, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        None => return Ok(Vec::new()),
        Some(rec) => rec?,
    };
    if first.iter().ne(header.iter().copied()) {
        return Err(Error::parse(1, format!("expected header `{}`", header.join(","))));
    }
    records
        .map(|rec| {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            Ok((line, rec))
        })
        .collect()
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i)
        .ok_or_else(|| Error::parse(line, format!("missing field {}", i + 1)))
}

fn parse_score<T: Scalar>(token: &str, line: usize) -> Result<T> {
    T::parse_finite(token).ok_or_else(|| Error::parse(line, format!("invalid score {token:?}")))
}

fn parse_id<I>(token: &str, line: usize, make: fn(&str) -> Result<I>) -> Result<I> {
    make(token).map_err(|e| Error::parse(line, e.to_string()))
}

fn csv_writer<W: Write>(writer: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(header)?;
    Ok(w)
}

fn finish_writer<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?
        .flush()?;
    Ok(())
}

pub fn read_observations<T: Scalar, R: Read>(reader: R) -> Result<Vec<Observation<T>>> {
    read_records(reader, &OBSERVATION_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() != 3 {
                return Err(Error::parse(line, "expected 3 fields"));
            }
            Ok(Observation {
                user: parse_id(field(&rec, 0, line)?, line, UserId::new)?,
                element: parse_id(field(&rec, 1, line)?, line, ElementId::new)?,
                score: parse_score(field(&rec, 2, line)?, line)?,
            })
        })
        .collect()
}

pub fn write_observations<T: Scalar, W: Write>(writer: W, observations: &[Observation<T>]) -> Result<()> {
    let mut w = csv_writer(writer, &OBSERVATION_HEADER)?;
    for o in observations {
        w.write_record([o.user.as_str(), o.element.as_str(), &o.score.to_token()])?;
    }
    finish_writer(w)
}

/// Reads a file in observation format that covers every user × element cell.
pub fn read_dense<T: Scalar, R: Read>(reader: R) -> Result<DenseUtilityMatrix<T>> {
    let obs = read_observations(reader)?;
    let sparse = SparseUtilityMatrix::build_over(&[], &[], &obs, DuplicatePolicy::Error)?;
    DenseUtilityMatrix::from_sparse(&sparse)
}

pub fn write_dense<T: Scalar, W: Write>(writer: W, dense: &DenseUtilityMatrix<T>) -> Result<()> {
    write_observations(writer, &dense.to_observations())
}

pub fn write_completed<T: Scalar, W: Write>(writer: W, completed: &CompletedMatrix<T>) -> Result<()> {
    let mut w = csv_writer(writer, &COMPLETED_HEADER)?;
    let dense = &completed.dense;
    for r in 0..dense.n_users() {
        for c in 0..dense.n_elements() {
            w.write_record([
                dense.users()[r].as_str(),
                dense.elements()[c].as_str(),
                &dense.get(r, c).to_token(),
                completed.provenance(r, c).as_str(),
            ])?;
        }
    }
    finish_writer(w)
}

pub fn read_completed<T: Scalar, R: Read>(reader: R) -> Result<CompletedMatrix<T>> {
    let mut obs = Vec::new();
    let mut flags = Vec::new();
    for (line, rec) in read_records(reader, &COMPLETED_HEADER)? {
        if rec.len() != 4 {
            return Err(Error::parse(line, "expected 4 fields"));
        }
        obs.push(Observation {
            user: parse_id(field(&rec, 0, line)?, line, UserId::new)?,
            element: parse_id(field(&rec, 1, line)?, line, ElementId::new)?,
            score: parse_score(field(&rec, 2, line)?, line)?,
        });
        flags.push(
            field(&rec, 3, line)?
                .parse::<Provenance>()
                .map_err(|e| Error::parse(line, e.to_string()))?,
        );
    }
    let sparse = SparseUtilityMatrix::build_over(&[], &[], &obs, DuplicatePolicy::Error)?;
    let dense = DenseUtilityMatrix::from_sparse(&sparse)?;
    let n = sparse.n_elements();
    let mut provenance = vec![Provenance::Predicted; obs.len()];
    for (o, flag) in obs.iter().zip(flags) {
        let r = sparse.user_index().get(&o.user).expect("interned");
        let c = sparse.element_index().get(&o.element).expect("interned");
        provenance[r * n + c] = flag;
    }
    CompletedMatrix::new(dense, provenance)
}

pub fn write_assignments<T: Scalar, W: Write>(writer: W, assignments: &[Assignment<T>]) -> Result<()> {
    let mut w = csv_writer(writer, &ASSIGNMENT_HEADER)?;
    for a in assignments {
        w.write_record([
            a.user.as_str(),
            a.element.as_str(),
            &a.score.to_token(),
            a.source.as_str(),
        ])?;
    }
    finish_writer(w)
}

pub fn read_assignments<T: Scalar, R: Read>(reader: R) -> Result<Vec<Assignment<T>>> {
    read_records(reader, &ASSIGNMENT_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() != 4 {
                return Err(Error::parse(line, "expected 4 fields"));
            }
            Ok(Assignment {
                user: parse_id(field(&rec, 0, line)?, line, UserId::new)?,
                element: parse_id(field(&rec, 1, line)?, line, ElementId::new)?,
                score: parse_score(field(&rec, 2, line)?, line)?,
                source: field(&rec, 3, line)?
                    .parse::<AssignmentSource>()
                    .map_err(|e| Error::parse(line, e.to_string()))?,
            })
        })
        .collect()
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<EventRecord>> {
    read_records(reader, &EVENT_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() != 3 {
                return Err(Error::parse(line, "expected 3 fields"));
            }
            Ok(EventRecord {
                user: parse_id(field(&rec, 0, line)?, line, UserId::new)?,
                element: parse_id(field(&rec, 1, line)?, line, ElementId::new)?,
                event_type: field(&rec, 2, line)?.parse::<EventType>()?,
            })
        })
        .collect()
}

pub fn write_events<W: Write>(writer: W, events: &[EventRecord]) -> Result<()> {
    let mut w = csv_writer(writer, &EVENT_HEADER)?;
    for e in events {
        w.write_record([e.user.as_str(), e.element.as_str(), e.event_type.as_str()])?;
    }
    finish_writer(w)
}

/// Element profiles for the typology simulator.
pub fn read_profiles<T: Scalar, R: Read>(reader: R) -> Result<Vec<(ElementId, [T; 4])>> {
    let header: Vec<&str> = std::iter::once("element_id").chain(BARTLE_TYPES).collect();
    read_records(reader, &header)?
        .into_iter()
        .map(|(line, rec)| {
            if rec.len() != 5 {
                return Err(Error::parse(line, "expected 5 fields"));
            }
            let id = parse_id(field(&rec, 0, line)?, line, ElementId::new)?;
            let mut p = [T::zero(); 4];
            for (d, slot) in p.iter_mut().enumerate() {
                *slot = parse_score(field(&rec, d + 1, line)?, line)?;
            }
            Ok((id, p))
        })
        .collect()
}

pub fn write_profiles<T: Scalar, W: Write>(writer: W, profiles: &[(ElementId, [T; 4])]) -> Result<()> {
    let header: Vec<&str> = std::iter::once("element_id").chain(BARTLE_TYPES).collect();
    let mut w = csv_writer(writer, &header)?;
    for (id, p) in profiles {
        let mut rec = vec![id.to_string()];
        rec.extend(p.iter().map(|v| v.to_token()));
        w.write_record(&rec)?;
    }
    finish_writer(w)
}

fn write_factor_line<T: Scalar, W: Write>(w: &mut W, tag: &str, id: &str, factors: &[T]) -> Result<()> {
    write!(w, "{tag} {id}")?;
    for v in factors {
        write!(w, " {}", v.to_token())?;
    }
    writeln!(w)?;
    Ok(())
}

/// Writes the factors only; training statistics are not persisted.
pub fn save_model<T: Scalar, W: Write>(mut writer: W, model: &LatentFactorModel<T>) -> Result<()> {
    writeln!(
        writer,
        "{MODEL_MAGIC} {} {} {}",
        model.k(),
        model.n_users(),
        model.n_elements()
    )?;
    for (r, u) in model.users().iter().enumerate() {
        write_factor_line(&mut writer, "u", u.as_str(), model.user_factor(r))?;
    }
    for (c, g) in model.elements().iter().enumerate() {
        write_factor_line(&mut writer, "g", g.as_str(), model.element_factor(c))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_model<T: Scalar, R: BufRead>(reader: R) -> Result<LatentFactorModel<T>> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty model file"))?;
    let header = header?;
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 4 || parts[0] != MODEL_MAGIC {
        return Err(Error::parse(1, format!("expected `{MODEL_MAGIC} <k> <m> <n>`")));
    }
    let dims: Vec<usize> = parts[1..]
        .iter()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(1, format!("invalid size {t:?}")))
        })
        .collect::<Result<_>>()?;
    let (k, m, n) = (dims[0], dims[1], dims[2]);
    let mut read_block = |tag: &str, count: usize| -> Result<(Vec<String>, Vec<T>)> {
        let mut ids = Vec::with_capacity(count);
        let mut factors = Vec::with_capacity(count * k);
        for _ in 0..count {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("model file truncated in `{tag}` block")))?;
            let line = line?;
            let tokens: Vec<&str> = line.split(' ').collect();
            if tokens.len() != k + 2 || tokens[0] != tag {
                return Err(Error::parse(
                    line_no,
                    format!("expected `{tag} <id>` and {k} floats"),
                ));
            }
            ids.push(tokens[1].to_string());
            for t in &tokens[2..] {
                factors.push(parse_score(t, line_no)?);
            }
        }
        Ok((ids, factors))
    };
    let (user_ids, uf) = read_block("u", m)?;
    let (element_ids, ef) = read_block("g", n)?;
    if let Some((line_no, extra)) = lines.next() {
        if !extra?.is_empty() {
            return Err(Error::parse(line_no, "unexpected content after element block"));
        }
    }
    let users = user_ids
        .iter()
        .map(|s| UserId::new(s))
        .collect::<Result<Vec<_>>>()?;
    let elements = element_ids
        .iter()
        .map(|s| ElementId::new(s))
        .collect::<Result<Vec<_>>>()?;
    LatentFactorModel::new(k, users, elements, uf, ef)
}

//! CSV reading and writing of profile directories.

use std::fs;
use std::io::Write;
use std::path::Path;

use csv::StringRecord;

use super::{
    validate, AcceptancePoint, DevicePlatform, DraftModel, ProfileFile, ProfileStore,
    VariantProfile, VerifierSpec,
};
use crate::error::{Error, Result};

/// Loads and validates the four profile files in `dir`.
pub fn load_profiles(dir: impl AsRef<Path>) -> Result<ProfileStore> {
    let store = load_unvalidated(dir)?;
    let violations = validate(&store);
    if violations.is_empty() {
        Ok(store)
    } else {
        Err(Error::Integrity(violations))
    }
}

/// Parses the profile files, enforcing per-field rules and key uniqueness
/// but not cross-file invariants. Use [`validate`] on the result.
pub fn load_unvalidated(dir: impl AsRef<Path>) -> Result<ProfileStore> {
    let dir = dir.as_ref();
    for file in ProfileFile::ALL {
        if !dir.join(file.file_name()).is_file() {
            return Err(Error::MissingInput {
                file: file.file_name().to_owned(),
            });
        }
    }

    let mut store = ProfileStore::new();
    for_each_row(dir, ProfileFile::Devices, |row| {
        let device = DevicePlatform {
            device_id: row.id("device_id")?,
            display_name: row.text("display_name")?.to_owned(),
            has_power_data: row.flag("has_power_data")?,
        };
        row.keyed(store.insert_device(device))
    })?;
    for_each_row(dir, ProfileFile::Verifiers, |row| {
        let verifier = VerifierSpec {
            target_id: row.id("target_id")?,
            price_per_mtok: row.number("price_per_mtok", |x| x >= 0.0, ">= 0")?,
            t_verify_s: row.number("t_verify_s", |x| x > 0.0, "> 0")?,
        };
        row.keyed(store.insert_verifier(verifier))
    })?;
    for_each_row(dir, ProfileFile::Variants, |row| {
        let model = DraftModel {
            model_id: row.id("model_id")?,
            family: row.text("family")?.to_owned(),
            params_billions: row.number("params_billions", |x| x > 0.0, "> 0")?,
        };
        let power_w = if row.text("power_w")?.is_empty() {
            None
        } else {
            Some(row.number("power_w", |x| x > 0.0, "> 0")?)
        };
        let variant = VariantProfile {
            model_id: model.model_id.clone(),
            quant_id: row.id("quant_id")?,
            device_id: row.id("device_id")?,
            v_d: row.number("v_d_tok_s", |x| x > 0.0, "> 0")?,
            power_w,
        };
        store
            .insert_model(model)
            .map_err(|e| row.error("model_id", e.to_string()))?;
        row.keyed(store.insert_variant(variant))
    })?;
    for_each_row(dir, ProfileFile::Acceptance, |row| {
        let k = row.text("k")?;
        let k = match k.parse::<u32>() {
            Ok(k) if k >= 1 => k,
            _ => return Err(row.error("k", format!("{k:?} is not an integer >= 1"))),
        };
        let point = AcceptancePoint {
            model_id: row.id("model_id")?,
            quant_id: row.id("quant_id")?,
            target_id: row.id("target_id")?,
            k,
            alpha: row.number("alpha", |x| (0.0..=1.0).contains(&x), "in range [0, 1]")?,
        };
        row.keyed(store.insert_acceptance(point))
    })?;
    Ok(store)
}

struct Row<'a> {
    file: ProfileFile,
    line: u64,
    record: &'a StringRecord,
}

impl Row<'_> {
    fn error(&self, column: &str, message: String) -> Error {
        Error::Malformed {
            file: self.file.file_name().to_owned(),
            line: self.line,
            column: column.to_owned(),
            message,
        }
    }

    fn text(&self, column: &str) -> Result<&str> {
        let idx = self
            .file
            .columns()
            .iter()
            .position(|c| *c == column)
            .expect("column belongs to file schema");
        self.record
            .get(idx)
            .ok_or_else(|| self.error(column, "missing field".into()))
    }

    fn id(&self, column: &str) -> Result<String> {
        let s = self.text(column)?;
        if super::is_valid_id(s) {
            Ok(s.to_owned())
        } else {
            Err(self.error(column, format!("invalid identifier {s:?}")))
        }
    }

    fn flag(&self, column: &str) -> Result<bool> {
        match self.text(column)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.error(column, format!("expected true or false, got {other:?}"))),
        }
    }

    fn number(&self, column: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<f64> {
        let s = self.text(column)?;
        let is_decimal = !s.is_empty()
            && s
                .bytes()
                .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+'));
        let x = match s.parse::<f64>() {
            Ok(x) if is_decimal && x.is_finite() => x,
            _ => return Err(self.error(column, format!("{s:?} is not a decimal number"))),
        };
        if ok(x) {
            Ok(x)
        } else {
            Err(self.error(column, format!("{x} out of range: must be {rule}")))
        }
    }

    /// Attaches the line number to a duplicate-key error from an insert.
    fn keyed(&self, res: Result<()>) -> Result<()> {
        res.map_err(|e| match e {
            Error::DuplicateKey { file, key } => Error::DuplicateKey {
                file,
                key: format!("{key} at line {}", self.line),
            },
            other => other,
        })
    }
}

fn for_each_row(
    dir: &Path,
    file: ProfileFile,
    mut f: impl FnMut(&Row<'_>) -> Result<()>,
) -> Result<()> {
    let path = dir.join(file.file_name());
    let name = file.file_name();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| csv_error(&path, name, e))?;

    let header = reader
        .headers()
        .map_err(|e| csv_error(&path, name, e))?
        .clone();
    let expected = file.columns();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Malformed {
            file: name.to_owned(),
            line: 1,
            column: "<header>".into(),
            message: format!("expected header {:?}", expected.join(",")),
        });
    }

    let mut record = StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                f(&Row { file, line, record: &record })?;
            }
            Err(e) => return Err(csv_error(&path, name, e)),
        }
    }
    Ok(())
}

fn csv_error(path: &Path, file: &str, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_owned(),
            source,
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Malformed {
            file: file.to_owned(),
            line,
            column: "<row>".into(),
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Malformed {
            file: file.to_owned(),
            line,
            column: "<row>".into(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `store` into `dir` in the same four-file layout, rows sorted by
/// key. Numbers use the shortest decimal text that reads back to the same
/// `f64`.
pub fn serialize(store: &ProfileStore, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;

    let mut rows = Vec::new();
    for d in store.devices() {
        rows.push(format!("{},{},{}", d.device_id, d.display_name, d.has_power_data));
    }
    write_file(dir, ProfileFile::Devices, &rows)?;

    rows.clear();
    for v in store.verifiers() {
        rows.push(format!("{},{},{}", v.target_id, v.price_per_mtok, v.t_verify_s));
    }
    write_file(dir, ProfileFile::Verifiers, &rows)?;

    rows.clear();
    for v in store.variants() {
        let (family, params) = match store.model(&v.model_id) {
            Ok(m) => (m.family.as_str(), m.params_billions.to_string()),
            Err(_) => ("", String::new()),
        };
        let power = v.power_w.map(|p| p.to_string()).unwrap_or_default();
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            v.model_id, family, params, v.quant_id, v.device_id, v.v_d, power
        ));
    }
    write_file(dir, ProfileFile::Variants, &rows)?;

    rows.clear();
    for a in store.acceptance_points() {
        rows.push(format!(
            "{},{},{},{},{}",
            a.model_id, a.quant_id, a.target_id, a.k, a.alpha
        ));
    }
    write_file(dir, ProfileFile::Acceptance, &rows)
}

fn write_file(dir: &Path, file: ProfileFile, rows: &[String]) -> Result<()> {
    let path = dir.join(file.file_name());
    let io_err = |source| Error::Io {
        path: path.clone(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(&path).map_err(io_err)?);
    writeln!(out, "{}", file.columns().join(",")).map_err(io_err)?;
    for row in rows {
        writeln!(out, "{row}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

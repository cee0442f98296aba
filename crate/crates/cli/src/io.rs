use std::fs;
use std::path::{Path, PathBuf};

use vrtl_core::instrument::{parse_spec, IntegritySpec};
use vrtl_core::psl::{parse_psl, Vunit};
use vrtl_core::verilog::{parse, SourceFile, VerilogError};

/// A usage, input or internal error; always exit status 3.
#[derive(Debug)]
pub struct Fail(pub String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

pub type Res<T> = Result<T, Fail>;

pub fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Fail(format!("{}: {e}", path.display())))
}

/// Writes through a sibling temporary file so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, text: &str) -> Res<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Fail(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, text).map_err(|e| Fail(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Fail(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Res<()> {
    fs::create_dir_all(dir).map_err(|e| Fail(format!("{}: {e}", dir.display())))
}

/// Parsed design plus the file each module came from, for diagnostics.
pub struct Design {
    pub file: SourceFile,
    origin: Vec<(String, PathBuf)>,
}

impl Design {
    pub fn load(paths: &[PathBuf]) -> Res<Design> {
        let mut file = SourceFile::default();
        let mut origin: Vec<(String, PathBuf)> = Vec::new();
        for p in paths {
            let parsed = parse(&read(p)?).map_err(|e| Fail(format!("{}:{e}", p.display())))?;
            for m in parsed.modules {
                if let Some((_, first)) = origin.iter().find(|(n, _)| *n == m.name) {
                    return Err(Fail(format!(
                        "{}: module `{}` already defined in {}",
                        p.display(),
                        m.name,
                        first.display()
                    )));
                }
                origin.push((m.name.clone(), p.clone()));
                file.modules.push(m);
            }
        }
        Ok(Design { file, origin })
    }

    /// Prefixes an elaboration error with the file of the failing module.
    pub fn explain(&self, e: VerilogError) -> Fail {
        match &e {
            VerilogError::Elab { module, .. } => {
                match self.origin.iter().find(|(n, _)| n == module) {
                    Some((_, p)) => Fail(format!("{}:{e}", p.display())),
                    None => Fail(e.to_string()),
                }
            }
            _ => Fail(e.to_string()),
        }
    }
}

pub fn load_spec(path: &Path) -> Res<IntegritySpec> {
    parse_spec(&read(path)?).map_err(|e| {
        if e.line > 0 {
            Fail(format!("{}:{}: {}", path.display(), e.line, e.message))
        } else {
            Fail(format!("{}: {}", path.display(), e.message))
        }
    })
}

/// Every vunit of every file, with the file it came from.
pub fn load_vunits(paths: &[PathBuf]) -> Res<Vec<(PathBuf, Vunit)>> {
    let mut out = Vec::new();
    for p in paths {
        let units = parse_psl(&read(p)?).map_err(|e| Fail(format!("{}:{e}", p.display())))?;
        out.extend(units.into_iter().map(|v| (p.clone(), v)));
    }
    Ok(out)
}

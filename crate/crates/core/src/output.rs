//! File output helpers. Every artifact is written to a temporary file in the
//! destination directory and renamed into place.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

pub fn atomic_write<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Writes a CSV file atomically from a header and string rows.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    atomic_write(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(header).map_err(io::Error::other)?;
        for row in rows {
            let row: Vec<String> = row.into_iter().collect();
            writer.write_record(&row).map_err(io::Error::other)?;
        }
        writer.flush()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        write_csv(
            &path,
            &["a", "b"],
            vec![vec!["1".to_string(), "x,y".to_string()]],
        )
        .unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n1,\"x,y\"\n");
        write_csv(&path, &["a"], Vec::<Vec<String>>::new()).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a\n");
    }
}

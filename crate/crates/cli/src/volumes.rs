use std::path::{Path, PathBuf};

use negspread::grid::{read_volume, read_volume_csv, write_volume, write_volume_csv, Volume};

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("txt"))
}

/// Sidecar next to a raw payload: `v.raw` -> `v.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads a raw volume with its sidecar, or a CSV file shaped by `dims`.
pub fn load(path: &Path, meta: Option<&Path>, dims: Option<&[usize]>) -> negspread::Result<Volume> {
    if is_csv(path) {
        read_volume_csv(path, dims)
    } else {
        let meta = meta.map_or_else(|| sidecar(path), Path::to_path_buf);
        read_volume(path, &meta)
    }
}

/// Writes CSV for `.csv`/`.txt` paths and raw f32 plus sidecar otherwise.
/// Returns every file written.
pub fn save(v: &Volume, path: &Path) -> negspread::Result<Vec<PathBuf>> {
    if is_csv(path) {
        write_volume_csv(v, path)?;
        Ok(vec![path.to_path_buf()])
    } else {
        let meta = sidecar(path);
        write_volume(v, path, &meta)?;
        Ok(vec![path.to_path_buf(), meta])
    }
}

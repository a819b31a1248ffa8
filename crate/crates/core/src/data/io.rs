//! Flat binary container for datasets plus a CSV debug export.
//!
//! Layout: magic, version, header fields, then the five row-major blocks
//! (labeled X/y, unlabeled X with hidden y, test X/y), all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::synth::{DatasetHeader, SplitDataset};
use crate::data::task::FamilyKind;
use crate::error::{Error, Result};
use crate::Mat;

const MAGIC: &[u8; 4] = b"CDML";
const VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn write_samples(w: &mut impl Write, x: &Mat, y: &[usize]) -> Result<()> {
    write_u32(w, x.rows() as u32)?;
    for &v in x.data() {
        write_f64(w, v)?;
    }
    for &label in y {
        write_u32(w, label as u32)?;
    }
    Ok(())
}

fn read_samples(r: &mut impl Read, dim: usize) -> Result<(Mat, Vec<usize>)> {
    let rows = read_u32(r)? as usize;
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows * dim {
        data.push(read_f64(r)?);
    }
    let mut y = Vec::with_capacity(rows);
    for _ in 0..rows {
        y.push(read_u32(r)? as usize);
    }
    Ok((Mat::new(rows, dim, data)?, y))
}

pub fn save_dataset(ds: &SplitDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let h = ds.header();
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, match h.family {
        FamilyKind::Gaussian2d => 0,
        FamilyKind::Icon8x8 => 1,
    })?;
    write_u32(&mut w, h.classes as u32)?;
    write_u32(&mut w, h.dim as u32)?;
    for &c in &h.labeled_counts {
        write_u32(&mut w, c as u32)?;
    }
    for &c in &h.unlabeled_counts {
        write_u32(&mut w, c as u32)?;
    }
    write_u32(&mut w, h.test_per_class as u32)?;
    write_f64(&mut w, h.mean)?;
    write_f64(&mut w, h.scale)?;
    write_f64(&mut w, h.norm_max)?;
    write_u64(&mut w, h.seed)?;
    let (lx, ly) = ds.labeled();
    write_samples(&mut w, lx, ly)?;
    write_samples(&mut w, ds.unlabeled_inputs(), ds.eval_only_unlabeled_labels())?;
    let (tx, ty) = ds.test();
    write_samples(&mut w, tx, ty)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<SplitDataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadContainer("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::BadContainer(format!("unsupported version {version}")));
    }
    let family = match read_u32(&mut r)? {
        0 => FamilyKind::Gaussian2d,
        1 => FamilyKind::Icon8x8,
        other => return Err(Error::BadContainer(format!("unknown family tag {other}"))),
    };
    let classes = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let mut labeled_counts = Vec::with_capacity(classes);
    for _ in 0..classes {
        labeled_counts.push(read_u32(&mut r)? as usize);
    }
    let mut unlabeled_counts = Vec::with_capacity(classes);
    for _ in 0..classes {
        unlabeled_counts.push(read_u32(&mut r)? as usize);
    }
    let test_per_class = read_u32(&mut r)? as usize;
    let mean = read_f64(&mut r)?;
    let scale = read_f64(&mut r)?;
    let norm_max = read_f64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let header = DatasetHeader {
        family,
        classes,
        dim,
        labeled_counts,
        unlabeled_counts,
        test_per_class,
        mean,
        scale,
        norm_max,
        seed,
    };
    let (lx, ly) = read_samples(&mut r, dim)?;
    let (ux, uy) = read_samples(&mut r, dim)?;
    let (tx, ty) = read_samples(&mut r, dim)?;
    Ok(SplitDataset::from_parts(header, lx, ly, ux, uy, tx, ty))
}

/// One row per sample: split, class-or-blank, features. Unlabeled rows keep
/// the class column empty so the debug dump mirrors what training can see.
pub fn export_csv(ds: &SplitDataset, w: &mut impl Write) -> Result<()> {
    let dim = ds.header().dim;
    write!(w, "split,class")?;
    for j in 0..dim {
        write!(w, ",x{j}")?;
    }
    writeln!(w)?;
    let dump = |w: &mut dyn Write, split: &str, x: &Mat, y: Option<&[usize]>| -> Result<()> {
        for (i, row) in x.iter_rows().enumerate() {
            match y {
                Some(labels) => write!(w, "{split},{}", labels[i])?,
                None => write!(w, "{split},")?,
            }
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    };
    let (lx, ly) = ds.labeled();
    dump(w, "labeled", lx, Some(ly))?;
    dump(w, "unlabeled", ds.unlabeled_inputs(), None)?;
    let (tx, ty) = ds.test();
    dump(w, "test", tx, Some(ty))?;
    Ok(())
}

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

/// Output directory that refuses to clobber files unless forced.
pub struct OutDir {
    root: PathBuf,
    force: bool,
}

impl OutDir {
    pub fn open(root: &Path, force: bool) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            force,
        })
    }

    /// Fails up front if any of `names` exists and overwriting is off.
    pub fn claim(&self, names: &[String]) -> anyhow::Result<()> {
        if self.force {
            return Ok(());
        }
        for n in names {
            let p = self.root.join(n);
            if p.exists() {
                bail!("{} exists; pass --force to overwrite", p.display());
            }
        }
        Ok(())
    }

    pub fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let p = self.root.join(name);
        if p.exists() && !self.force {
            bail!("{} exists; pass --force to overwrite", p.display());
        }
        let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write_str(&self, name: &str, text: &str) -> anyhow::Result<()> {
        use std::io::Write;
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

//! RVSS binary store.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        4 bytes  "RVSS"
//! version      u32
//! dim          u32
//! m            u32
//! global_seed  u64
//! weighting    u8       0 = tf-idf, 1 = uniform
//! n_terms      u32
//! n_cliques    u32
//! term table   n_terms x { len u32, utf8 bytes, salt u32, degenerate u8 }
//! clique table n_cliques x { count u32, count x term id u32 }
//! coordinates  n_terms x dim x f32
//! ```

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::{Lexicon, TermId};
use crate::seedgen::{SpaceConfig, Weighting};
use crate::space::SemanticSpace;

pub const MAGIC: &[u8; 4] = b"RVSS";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 1 + 4 + 4;

/// Maximum deviation of a stored norm from 1 before a store is rejected.
pub const LOAD_NORM_TOLERANCE: f64 = 1e-4;

/// Bytes taken by the coordinate block of `n_terms` vectors of `dim` floats.
pub fn coordinate_bytes(n_terms: usize, dim: usize) -> usize {
    n_terms * dim * 4
}

impl SemanticSpace {
    /// Exact size in bytes of the serialized store.
    pub fn encoded_len(&self) -> usize {
        let terms: usize = self.lexicon.terms().iter().map(|t| 4 + t.len() + 4 + 1).sum();
        let cliques: usize = self.lexicon.cliques().iter().map(|c| 4 + 4 * c.len()).sum();
        HEADER_LEN + terms + cliques + self.vectors.len() * 4
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let too_big = |what: &str| Error::domain(format!("{what} does not fit in u32"));
        let u32_of = |n: usize, what: &str| u32::try_from(n).map_err(|_| too_big(what));

        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&u32_of(self.config.dim, "dim")?.to_le_bytes())?;
        w.write_all(&u32_of(self.config.m, "m")?.to_le_bytes())?;
        w.write_all(&self.config.global_seed.to_le_bytes())?;
        w.write_all(&[self.config.weighting.to_byte()])?;
        w.write_all(&u32_of(self.lexicon.n_terms(), "n_terms")?.to_le_bytes())?;
        w.write_all(&u32_of(self.lexicon.n_cliques(), "n_cliques")?.to_le_bytes())?;

        for (i, term) in self.lexicon.terms().iter().enumerate() {
            w.write_all(&u32_of(term.len(), "term length")?.to_le_bytes())?;
            w.write_all(term.as_bytes())?;
            w.write_all(&self.salts[i].to_le_bytes())?;
            w.write_all(&[u8::from(self.degenerate[i])])?;
        }
        for clique in self.lexicon.cliques() {
            w.write_all(&u32_of(clique.len(), "clique size")?.to_le_bytes())?;
            for &t in clique {
                w.write_all(&t.to_le_bytes())?;
            }
        }
        // Chunked to avoid one write call per coordinate.
        let mut chunk = Vec::with_capacity(4 * 4096);
        for block in self.vectors.chunks(4096) {
            chunk.clear();
            for x in block {
                chunk.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&chunk)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.save(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.save(BufWriter::new(file))
    }

    pub fn load<R: Read>(mut r: R) -> Result<SemanticSpace> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::Corrupt(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let dim = read_u32(&mut r, "dim")? as usize;
        let m = read_u32(&mut r, "m")? as usize;
        let global_seed = read_u64(&mut r, "global seed")?;
        let weighting = Weighting::from_byte(read_u8(&mut r, "weighting")?)
            .ok_or_else(|| Error::Corrupt("unknown weighting code".into()))?;
        let config = SpaceConfig::new(dim, m, global_seed, weighting)
            .map_err(|e| Error::Corrupt(format!("invalid header: {e}")))?;
        let n_terms = read_u32(&mut r, "term count")? as usize;
        let n_cliques = read_u32(&mut r, "clique count")? as usize;

        let mut terms = Vec::with_capacity(n_terms.min(1 << 20));
        let mut salts = Vec::with_capacity(n_terms.min(1 << 20));
        let mut degenerate = Vec::with_capacity(n_terms.min(1 << 20));
        for i in 0..n_terms {
            let len = read_u32(&mut r, "term length")? as usize;
            let mut bytes = vec![0u8; len];
            read_exact(&mut r, &mut bytes, "term text")?;
            let term = String::from_utf8(bytes)
                .map_err(|_| Error::Corrupt(format!("term {i} is not UTF-8")))?;
            terms.push(term);
            salts.push(read_u32(&mut r, "salt")?);
            degenerate.push(match read_u8(&mut r, "degenerate flag")? {
                0 => false,
                1 => true,
                b => return Err(Error::Corrupt(format!("bad degenerate flag {b}"))),
            });
        }

        let mut cliques = Vec::with_capacity(n_cliques.min(1 << 20));
        for _ in 0..n_cliques {
            let count = read_u32(&mut r, "clique size")? as usize;
            let mut ids = Vec::with_capacity(count.min(1 << 16));
            for _ in 0..count {
                ids.push(read_u32(&mut r, "clique member")? as TermId);
            }
            cliques.push(ids);
        }
        let lexicon = Lexicon::from_parts(terms, cliques)?;

        let n_coords = n_terms
            .checked_mul(dim)
            .ok_or_else(|| Error::Corrupt("coordinate block overflows".into()))?;
        let mut vectors = Vec::with_capacity(n_coords);
        let mut buf = vec![0u8; 4 * 4096];
        let mut left = n_coords;
        while left > 0 {
            let take = left.min(4096);
            read_exact(&mut r, &mut buf[..4 * take], "coordinates")?;
            vectors.extend(
                buf[..4 * take]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            );
            left -= take;
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Corrupt("trailing bytes after coordinate block".into()));
        }

        for (t, row) in vectors.chunks(dim.max(1)).enumerate() {
            let norm = row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
            let ok = if degenerate[t] {
                norm == 0.0
            } else {
                (norm - 1.0).abs() <= LOAD_NORM_TOLERANCE
            };
            if !ok {
                return Err(Error::Corrupt(format!(
                    "vector of {:?} has norm {norm}",
                    lexicon.terms()[t]
                )));
            }
        }
        Ok(SemanticSpace::from_stored(config, lexicon, salts, degenerate, vectors))
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<SemanticSpace> {
        let file = std::fs::File::open(path)?;
        Self::load(BufReader::new(file))
    }

    /// 64-bit FNV-1a over the serialized store, as 16 hex digits.
    pub fn checksum(&self) -> String {
        let mut h = Fnv64::default();
        self.save(&mut h).expect("hashing writer cannot fail");
        format!("{:016x}", h.0)
    }
}

struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Write for Fnv64 {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        for &b in buf {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Corrupt(format!("truncated store while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b, what)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> SemanticSpace {
        let lex = Lexicon::parse_str("a;b\nb;c\n").unwrap().0;
        SemanticSpace::build(lex, SpaceConfig::new(64, 4, 5, Weighting::Uniform).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let s = fixture();
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), s.encoded_len());
        let back = SemanticSpace::load(&bytes[..]).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back, s);
    }

    #[test]
    fn header_layout() {
        let bytes = fixture().to_bytes();
        assert_eq!(&bytes[..4], b"RVSS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 64);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 5);
        assert_eq!(bytes[24], 1);
        assert_eq!(u32::from_le_bytes(bytes[25..29].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[29..33].try_into().unwrap()), 2);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let bytes = fixture().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(SemanticSpace::load(&bad[..]), Err(Error::Corrupt(_))));

        let mut bumped = bytes.clone();
        bumped[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            SemanticSpace::load(&bumped[..]),
            Err(Error::Version { found: 2, expected: 1 })
        ));

        for cut in [3, 20, 40, bytes.len() - 1] {
            let err = SemanticSpace::load(&bytes[..cut]).unwrap_err();
            assert!(err.is_corruption(), "cut at {cut}: {err}");
        }

        let mut longer = bytes.clone();
        longer.push(0);
        assert!(SemanticSpace::load(&longer[..]).is_err());
    }

    #[test]
    fn rejects_denormalized_vectors() {
        let mut bytes = fixture().to_bytes();
        let n = bytes.len();
        // Scale the last coordinate of the last vector well off the sphere.
        bytes[n - 4..].copy_from_slice(&3.0f32.to_le_bytes());
        assert!(matches!(SemanticSpace::load(&bytes[..]), Err(Error::Corrupt(_))));
    }

    #[test]
    fn checksum_tracks_content() {
        let s = fixture();
        assert_eq!(s.checksum(), fixture().checksum());
        let mut t = s.clone();
        t.add_clique(&["c", "d"]).unwrap();
        assert_ne!(s.checksum(), t.checksum());
    }
}

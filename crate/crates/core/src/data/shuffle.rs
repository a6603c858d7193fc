use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::Result;

/// xorshift64* (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D), seeded
/// through one splitmix64 step.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        XorShift64Star {
            state: if z == 0 { 1 } else { z },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
}

/// Fisher–Yates from the last slot down, `j = next % (i + 1)`.
pub fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = XorShift64Star::new(seed);
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    shuffle(&mut p, seed);
    p
}

/// Shuffles the lines of `input` into `output` through an index of line
/// offsets, so only the index is held in memory. Returns the line count.
pub fn shuffle_file(input: &Path, output: &Path, seed: u64) -> Result<usize> {
    let mut reader = BufReader::new(File::open(input)?);
    let mut offsets = Vec::new();
    let mut pos = 0u64;
    let mut line = Vec::new();
    loop {
        line.clear();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        offsets.push(pos);
        pos += n as u64;
    }
    offsets.push(pos);
    let spans: Vec<(u64, u64)> = offsets.windows(2).map(|w| (w[0], w[1])).collect();
    let mut order: Vec<usize> = (0..spans.len()).collect();
    shuffle(&mut order, seed);

    let mut src = File::open(input)?;
    let mut out = BufWriter::new(File::create(output)?);
    let mut buf = Vec::new();
    for i in order {
        let (start, end) = spans[i];
        buf.resize((end - start) as usize, 0);
        src.seek(SeekFrom::Start(start))?;
        src.read_exact(&mut buf)?;
        out.write_all(&buf)?;
        if buf.last() != Some(&b'\n') {
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(spans.len())
}

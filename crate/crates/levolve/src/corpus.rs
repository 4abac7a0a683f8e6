//! Level corpus handling: text level parsing, sliding-window extraction and
//! the one-hot tensor encoding consumed by the GAN.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::{Array3, ArrayView3};
use thiserror::Error;

/// Number of distinct tile identities.
pub const NUM_TILES: usize = 10;
/// Corpus levels are always this many tile rows high.
pub const LEVEL_HEIGHT: usize = 14;
/// Training windows are this many tile columns wide.
pub const WINDOW_WIDTH: usize = 28;
/// Spatial side of the padded one-hot encoding.
pub const ENCODED_SIZE: usize = 32;
/// Tile identity used for the passable background and for padding.
pub const EMPTY_TILE: u8 = 2;

/// Symbol table, indexed by tile identity.
pub const SYMBOLS: [char; NUM_TILES] = ['X', 'S', '-', '?', 'Q', 'E', '<', '>', '[', ']'];

pub fn symbol_to_id(ch: char) -> Option<u8> {
    SYMBOLS.iter().position(|&s| s == ch).map(|i| i as u8)
}

pub fn id_to_symbol(id: u8) -> char {
    SYMBOLS[id as usize]
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty level text")]
    EmptyInput,
    #[error("unknown symbol '{symbol}' at row {row}, column {col}")]
    UnknownSymbol { symbol: char, row: usize, col: usize },
    #[error("row {row} has length {got}, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("grid width {width} is narrower than a window ({min})")]
    TooNarrow { width: usize, min: usize },
    #[error("non-finite value in decoder input")]
    NonFiniteInput,
    #[error("bad windows file: {0}")]
    BadWindowsFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Dense row-major grid of tile identities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TileGrid {
    height: usize,
    width: usize,
    cells: Vec<u8>,
}

impl TileGrid {
    /// Grid filled with the empty tile.
    pub fn empty(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0);
        TileGrid { height, width, cells: vec![EMPTY_TILE; height * width] }
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<u8>) -> Self {
        assert_eq!(cells.len(), height * width);
        assert!(cells.iter().all(|&c| (c as usize) < NUM_TILES));
        TileGrid { height, width, cells }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, id: u8) {
        assert!((id as usize) < NUM_TILES);
        self.cells[row * self.width + col] = id;
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.cells[row * self.width..(row + 1) * self.width]
    }

    /// Horizontal concatenation; all grids must share a height.
    pub fn concat_horizontal(grids: &[TileGrid]) -> TileGrid {
        assert!(!grids.is_empty());
        let height = grids[0].height;
        assert!(grids.iter().all(|g| g.height == height));
        let width: usize = grids.iter().map(|g| g.width).sum();
        let mut out = TileGrid::empty(height, width);
        let mut x0 = 0;
        for g in grids {
            for r in 0..height {
                for c in 0..g.width {
                    out.set(r, x0 + c, g.get(r, c));
                }
            }
            x0 += g.width;
        }
        out
    }
}

/// Parse symbol rows into a grid. All rows must be equally long.
pub fn parse_vglc(text: &str) -> Result<TileGrid, CorpusError> {
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    // Ignore trailing blank lines so files with a final newline round-trip.
    let lines: Vec<&str> = {
        let last = lines.iter().rposition(|l| !l.is_empty());
        match last {
            Some(i) => lines[..=i].to_vec(),
            None => return Err(CorpusError::EmptyInput),
        }
    };
    let width = lines[0].chars().count();
    let mut cells = Vec::with_capacity(lines.len() * width);
    for (row, line) in lines.iter().enumerate() {
        let mut count = 0;
        for (col, ch) in line.chars().enumerate() {
            let id = symbol_to_id(ch)
                .ok_or(CorpusError::UnknownSymbol { symbol: ch, row, col })?;
            cells.push(id);
            count += 1;
        }
        if count != width {
            return Err(CorpusError::RaggedRows { row, expected: width, got: count });
        }
    }
    Ok(TileGrid { height: lines.len(), width, cells })
}

/// Inverse of [`parse_vglc`]; ends with a newline.
pub fn render_vglc(grid: &TileGrid) -> String {
    let mut out = String::with_capacity((grid.width + 1) * grid.height);
    for r in 0..grid.height {
        for c in 0..grid.width {
            out.push(id_to_symbol(grid.get(r, c)));
        }
        out.push('\n');
    }
    out
}

pub fn load_level_file(path: &Path) -> Result<TileGrid, CorpusError> {
    let text = fs::read_to_string(path)?;
    parse_vglc(&text)
}

/// All width-28 windows of a height-14 level, stride one, left to right.
pub fn slide_windows(grid: &TileGrid) -> Result<Vec<TileGrid>, CorpusError> {
    assert_eq!(grid.height, LEVEL_HEIGHT, "corpus levels are {LEVEL_HEIGHT} rows high");
    if grid.width < WINDOW_WIDTH {
        return Err(CorpusError::TooNarrow { width: grid.width, min: WINDOW_WIDTH });
    }
    let mut windows = Vec::with_capacity(grid.width - WINDOW_WIDTH + 1);
    for x0 in 0..=grid.width - WINDOW_WIDTH {
        let mut w = TileGrid::empty(LEVEL_HEIGHT, WINDOW_WIDTH);
        for r in 0..LEVEL_HEIGHT {
            for c in 0..WINDOW_WIDTH {
                w.set(r, c, grid.get(r, x0 + c));
            }
        }
        windows.push(w);
    }
    Ok(windows)
}

/// One-hot encode a 28x14 window into a (10, 32, 32) tensor.
///
/// Content sits in the top-left corner; the 4 right columns and 18 bottom
/// rows are padding carrying the empty-tile channel.
pub fn encode_window(window: &TileGrid) -> Array3<f32> {
    assert_eq!(window.height, LEVEL_HEIGHT);
    assert_eq!(window.width, WINDOW_WIDTH);
    let mut t = Array3::<f32>::zeros((NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
    for r in 0..ENCODED_SIZE {
        for c in 0..ENCODED_SIZE {
            let id = if r < LEVEL_HEIGHT && c < WINDOW_WIDTH {
                window.get(r, c)
            } else {
                EMPTY_TILE
            };
            t[[id as usize, r, c]] = 1.0;
        }
    }
    t
}

/// Crop a (10, 32, 32) tensor to its top-left 28x14 region and take the
/// per-cell channel argmax. Ties resolve to the lowest tile identity.
pub fn decode_window(tensor: ArrayView3<'_, f64>) -> Result<TileGrid, CorpusError> {
    assert_eq!(tensor.dim(), (NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
    let mut grid = TileGrid::empty(LEVEL_HEIGHT, WINDOW_WIDTH);
    for r in 0..LEVEL_HEIGHT {
        for c in 0..WINDOW_WIDTH {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for ch in 0..NUM_TILES {
                let v = tensor[[ch, r, c]];
                if !v.is_finite() {
                    return Err(CorpusError::NonFiniteInput);
                }
                // Strict comparison keeps the lowest identity on ties.
                if v > best_v {
                    best_v = v;
                    best = ch;
                }
            }
            grid.set(r, c, best as u8);
        }
    }
    Ok(grid)
}

const WINDOWS_MAGIC: &[u8; 4] = b"LFW1";

/// Write windows as a flat binary: magic "LFW1", u32 LE count, then each
/// tensor as 10*32*32 little-endian f32 values in channel-major order.
pub fn write_windows_file(path: &Path, windows: &[Array3<f32>]) -> Result<(), CorpusError> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(WINDOWS_MAGIC)?;
    f.write_all(&(windows.len() as u32).to_le_bytes())?;
    for w in windows {
        assert_eq!(w.dim(), (NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
        for &v in w.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_windows_file(path: &Path) -> Result<Vec<Array3<f32>>, CorpusError> {
    let mut f = io::BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != WINDOWS_MAGIC {
        return Err(CorpusError::BadWindowsFile("bad magic".into()));
    }
    let mut nb = [0u8; 4];
    f.read_exact(&mut nb)?;
    let count = u32::from_le_bytes(nb) as usize;
    let per = NUM_TILES * ENCODED_SIZE * ENCODED_SIZE;
    let mut windows = Vec::with_capacity(count);
    let mut buf = vec![0u8; per * 4];
    for _ in 0..count {
        f.read_exact(&mut buf)
            .map_err(|_| CorpusError::BadWindowsFile("truncated tensor data".into()))?;
        let vals: Vec<f32> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        windows.push(
            Array3::from_shape_vec((NUM_TILES, ENCODED_SIZE, ENCODED_SIZE), vals)
                .expect("shape fixed above"),
        );
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_strategy(height: usize, width: usize) -> impl Strategy<Value = TileGrid> {
        prop::collection::vec(0u8..NUM_TILES as u8, height * width)
            .prop_map(move |cells| TileGrid::from_cells(height, width, cells))
    }

    #[test]
    fn parse_maps_table_symbols() {
        let g = parse_vglc("-X").unwrap();
        assert_eq!(g.cells(), &[2, 0]);
        let g = parse_vglc("<>\n[]").unwrap();
        assert_eq!(g.row(0), &[6, 7]);
        assert_eq!(g.row(1), &[8, 9]);
        let g = parse_vglc("XS-?QE<>[]").unwrap();
        assert_eq!(g.cells(), &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn parse_rejects_unknown_symbol() {
        match parse_vglc("-Z-") {
            Err(CorpusError::UnknownSymbol { symbol: 'Z', row: 0, col: 1 }) => {}
            other => panic!("expected UnknownSymbol, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        match parse_vglc("--\n---") {
            Err(CorpusError::RaggedRows { row: 1, expected: 2, got: 3 }) => {}
            other => panic!("expected RaggedRows, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_empty() {
        assert!(matches!(parse_vglc(""), Err(CorpusError::EmptyInput)));
        assert!(matches!(parse_vglc("\n\n"), Err(CorpusError::EmptyInput)));
    }

    #[test]
    fn render_is_inverse() {
        let g = TileGrid::from_cells(1, 2, vec![2, 0]);
        assert_eq!(render_vglc(&g), "-X\n");
        let one = TileGrid::from_cells(1, 1, vec![2]);
        assert_eq!(render_vglc(&one), "-\n");
    }

    #[test]
    fn slide_window_counts() {
        let g = TileGrid::empty(LEVEL_HEIGHT, WINDOW_WIDTH);
        let ws = slide_windows(&g).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0], g);

        let narrow = TileGrid::empty(LEVEL_HEIGHT, WINDOW_WIDTH - 1);
        assert!(matches!(
            slide_windows(&narrow),
            Err(CorpusError::TooNarrow { width: 27, min: 28 })
        ));
    }

    #[test]
    fn encode_layout_and_padding() {
        let mut w = TileGrid::empty(LEVEL_HEIGHT, WINDOW_WIDTH);
        w.set(0, 0, 0);
        let t = encode_window(&w);
        assert_eq!(t[[0, 0, 0]], 1.0);
        for ch in 1..NUM_TILES {
            assert_eq!(t[[ch, 0, 0]], 0.0);
        }
        // Padding cells carry the empty channel.
        assert_eq!(t[[EMPTY_TILE as usize, 31, 31]], 1.0);
        assert_eq!(t[[EMPTY_TILE as usize, 13, 31]], 1.0);
        assert_eq!(t[[EMPTY_TILE as usize, 31, 0]], 1.0);
        // Every spatial cell is one-hot.
        for r in 0..ENCODED_SIZE {
            for c in 0..ENCODED_SIZE {
                let sum: f32 = (0..NUM_TILES).map(|ch| t[[ch, r, c]]).sum();
                assert_eq!(sum, 1.0);
            }
        }
    }

    #[test]
    fn decode_tie_breaks_to_lowest_id() {
        let t = Array3::<f64>::zeros((NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
        let g = decode_window(t.view()).unwrap();
        assert!(g.cells().iter().all(|&c| c == 0));

        let mut t = Array3::<f64>::zeros((NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
        t[[5, 3, 4]] = 0.9;
        t[[2, 3, 4]] = 0.2;
        let g = decode_window(t.view()).unwrap();
        assert_eq!(g.get(3, 4), 5);
    }

    #[test]
    fn decode_rejects_non_finite() {
        let mut t = Array3::<f64>::zeros((NUM_TILES, ENCODED_SIZE, ENCODED_SIZE));
        t[[0, 0, 0]] = f64::NAN;
        assert!(matches!(decode_window(t.view()), Err(CorpusError::NonFiniteInput)));
    }

    #[test]
    fn windows_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let mut g = TileGrid::empty(LEVEL_HEIGHT, WINDOW_WIDTH);
        g.set(2, 2, 7);
        let ws = vec![encode_window(&g), encode_window(&TileGrid::empty(14, 28))];
        write_windows_file(&path, &ws).unwrap();
        let back = read_windows_file(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], ws[0]);
        assert_eq!(back[1], ws[1]);
        // Header: magic plus count, then raw f32 data.
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"LFW1");
        assert_eq!(u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]), 2);
        assert_eq!(bytes.len(), 8 + 2 * 10 * 32 * 32 * 4);
    }

    #[test]
    fn truncated_windows_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let ws = vec![encode_window(&TileGrid::empty(14, 28))];
        write_windows_file(&path, &ws).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_windows_file(&path).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(g in grid_strategy(LEVEL_HEIGHT, WINDOW_WIDTH)) {
            let t = encode_window(&g).mapv(f64::from);
            let back = decode_window(t.view()).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn parse_render_round_trip(g in (1usize..6, 1usize..40).prop_flat_map(|(h, w)| grid_strategy(h, w))) {
            let text = render_vglc(&g);
            let back = parse_vglc(&text).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn window_count_matches_width(w in 28usize..80) {
            let g = TileGrid::empty(LEVEL_HEIGHT, w);
            let ws = slide_windows(&g).unwrap();
            prop_assert_eq!(ws.len(), w - 27);
        }
    }
}

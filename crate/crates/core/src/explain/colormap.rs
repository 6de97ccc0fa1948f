use std::sync::OnceLock;

/// 256-entry RGB lookup tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    #[default]
    Jet,
}

impl Colormap {
    /// Color for a value in `[0, 1]` (clamped), using the nearest of 256 entries.
    pub fn map(self, value: f32) -> [u8; 3] {
        let i = (value.clamp(0.0, 1.0) * 255.0).round() as usize;
        match self {
            Colormap::Jet => jet_lut()[i],
        }
    }
}

/// The jet table shipped in `assets/jet.csv`.
pub fn jet_lut() -> &'static [[u8; 3]; 256] {
    static LUT: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [[0u8; 3]; 256];
        let rows = include_str!("../../assets/jet.csv").lines();
        for (entry, line) in lut.iter_mut().zip(rows) {
            for (c, v) in entry.iter_mut().zip(line.split(',')) {
                *c = v.trim().parse().expect("jet.csv holds bytes");
            }
        }
        lut
    })
}

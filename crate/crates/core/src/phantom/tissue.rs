use std::fmt;

/// Tissue classes of the anatomical model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum TissueId {
    Bkg = 0,
    Csf = 1,
    Gm = 2,
    Wm = 3,
    Fat = 4,
    Muscle = 5,
    Skin = 6,
    Skull = 7,
    Glial = 8,
    Conn = 9,
}

/// The classification targets, in canonical order.
pub const BRAIN_TISSUES: [TissueId; 3] = [TissueId::Csf, TissueId::Gm, TissueId::Wm];

impl TissueId {
    pub const ALL: [TissueId; 10] = [
        TissueId::Bkg,
        TissueId::Csf,
        TissueId::Gm,
        TissueId::Wm,
        TissueId::Fat,
        TissueId::Muscle,
        TissueId::Skin,
        TissueId::Skull,
        TissueId::Glial,
        TissueId::Conn,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(v: u8) -> Option<Self> {
        Self::ALL.get(usize::from(v)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueId::Bkg => "BKG",
            TissueId::Csf => "CSF",
            TissueId::Gm => "GM",
            TissueId::Wm => "WM",
            TissueId::Fat => "FAT",
            TissueId::Muscle => "MUSCLE",
            TissueId::Skin => "SKIN",
            TissueId::Skull => "SKULL",
            TissueId::Glial => "GLIAL",
            TissueId::Conn => "CONN",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.name().eq_ignore_ascii_case(s))
    }

    /// Index among [`BRAIN_TISSUES`], if this is a classification target.
    pub fn class_index(self) -> Option<usize> {
        BRAIN_TISSUES.iter().position(|&t| t == self)
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        BRAIN_TISSUES.get(i).copied()
    }

    /// NMR properties; `None` for background.
    pub fn relaxation(self) -> Option<RelaxationEntry> {
        let e = |rho, t1_15, t2_15, t1_30, t2_30| {
            Some(RelaxationEntry {
                proton_density: rho,
                t1_15,
                t2_15,
                t1_30,
                t2_30,
            })
        };
        match self {
            TissueId::Bkg => None,
            TissueId::Csf => e(100.0, 4326.0, 791.0, 4313.0, 503.0),
            TissueId::Gm => e(86.0, 1124.0, 95.0, 1820.0, 99.0),
            TissueId::Wm => e(77.0, 884.0, 72.0, 1084.0, 69.0),
            TissueId::Fat => e(100.0, 343.0, 58.0, 382.0, 68.0),
            TissueId::Muscle => e(100.0, 629.0, 44.0, 832.0, 50.0),
            TissueId::Skin => e(100.0, 230.0, 35.0, 306.0, 22.0),
            // Skull T2 values are T2* (UTE); used as the decay constant as-is.
            TissueId::Skull => e(0.0, 200.0, 0.46, 223.0, 0.39),
            TissueId::Glial => e(86.0, 1124.0, 95.0, 1820.0, 99.0),
            TissueId::Conn => e(77.0, 1124.0, 95.0, 1820.0, 99.0),
        }
    }
}

impl fmt::Display for TissueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Proton density (percent) and relaxation times (ms) at 1.5 T and 3.0 T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationEntry {
    pub proton_density: f64,
    pub t1_15: f64,
    pub t2_15: f64,
    pub t1_30: f64,
    pub t2_30: f64,
}

impl RelaxationEntry {
    /// (T1, T2) at the given field strength.
    pub fn times_at(&self, b0: f64) -> Option<(f64, f64)> {
        if (b0 - 1.5).abs() < 1e-9 {
            Some((self.t1_15, self.t2_15))
        } else if (b0 - 3.0).abs() < 1e-9 {
            Some((self.t1_30, self.t2_30))
        } else {
            None
        }
    }
}

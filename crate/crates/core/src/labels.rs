//! Per-pixel class assignments and the class vocabularies used by the
//! coarse, fine and component networks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Label value excluded from every loss and metric.
pub const IGNORE: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vocabulary {
    /// background, skin, hair
    Coarse,
    /// The 11-class fine vocabulary (components split left/right).
    Fine,
    /// other, eyebrow, eye
    Eye,
    /// other, nose
    Nose,
    /// other, upper lip, inner mouth, lower lip
    Mouth,
}

const COARSE: &[&str] = &["background", "skin", "hair"];
const FINE: &[&str] = &[
    "background",
    "skin",
    "hair",
    "left_brow",
    "right_brow",
    "left_eye",
    "right_eye",
    "nose",
    "upper_lip",
    "inner_mouth",
    "lower_lip",
];
const EYE: &[&str] = &["other", "eyebrow", "eye"];
const NOSE: &[&str] = &["other", "nose"];
const MOUTH: &[&str] = &["other", "upper_lip", "inner_mouth", "lower_lip"];

/// Fine class ids.
pub mod fine {
    pub const BACKGROUND: u8 = 0;
    pub const SKIN: u8 = 1;
    pub const HAIR: u8 = 2;
    pub const LEFT_BROW: u8 = 3;
    pub const RIGHT_BROW: u8 = 4;
    pub const LEFT_EYE: u8 = 5;
    pub const RIGHT_EYE: u8 = 6;
    pub const NOSE: u8 = 7;
    pub const UPPER_LIP: u8 = 8;
    pub const INNER_MOUTH: u8 = 9;
    pub const LOWER_LIP: u8 = 10;
    /// Classes scored as facial components.
    pub const COMPONENTS: [u8; 8] =
        [LEFT_BROW, RIGHT_BROW, LEFT_EYE, RIGHT_EYE, NOSE, UPPER_LIP, INNER_MOUTH, LOWER_LIP];
}

impl Vocabulary {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            Vocabulary::Coarse => COARSE,
            Vocabulary::Fine => FINE,
            Vocabulary::Eye => EYE,
            Vocabulary::Nose => NOSE,
            Vocabulary::Mouth => MOUTH,
        }
    }

    pub fn len(self) -> usize {
        self.names().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn tag(self) -> &'static str {
        match self {
            Vocabulary::Coarse => "coarse",
            Vocabulary::Fine => "fine",
            Vocabulary::Eye => "eye",
            Vocabulary::Nose => "nose",
            Vocabulary::Mouth => "mouth",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "coarse" => Vocabulary::Coarse,
            "fine" => Vocabulary::Fine,
            "eye" => Vocabulary::Eye,
            "nose" => Vocabulary::Nose,
            "mouth" => Vocabulary::Mouth,
            _ => return None,
        })
    }

    /// Maps a fine id onto the coarse vocabulary (components count as skin).
    pub fn fine_to_coarse(id: u8) -> u8 {
        match id {
            IGNORE => IGNORE,
            fine::BACKGROUND => 0,
            fine::HAIR => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    h: usize,
    w: usize,
    vocab: Vocabulary,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn filled(h: usize, w: usize, vocab: Vocabulary, id: u8) -> Self {
        LabelMap { h, w, vocab, data: vec![id; h * w] }
    }

    /// Validates every id against the vocabulary.
    pub fn from_vec(h: usize, w: usize, vocab: Vocabulary, data: Vec<u8>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::Shape(format!("{} labels for a {h}x{w} map", data.len())));
        }
        let map = LabelMap { h, w, vocab, data };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let classes = self.vocab.len();
        match self.data.iter().find(|&&v| v != IGNORE && v as usize >= classes) {
            Some(&index) => Err(Error::ClassOutOfRange { index, classes }),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, id: u8) {
        self.data[y * self.w + x] = id;
    }

    /// Applies `f` to every non-ignore id and switches vocabulary.
    pub fn relabel(&self, vocab: Vocabulary, f: impl Fn(u8) -> u8) -> Result<LabelMap> {
        let data = self.data.iter().map(|&v| if v == IGNORE { IGNORE } else { f(v) }).collect();
        LabelMap::from_vec(self.h, self.w, vocab, data)
    }

    /// Nearest-neighbour decimation by an integer factor, sampling the pixel
    /// at the centre of each block (bottom-right of centre for even factors).
    pub fn downsample(&self, factor: usize) -> Result<LabelMap> {
        if factor == 0 || !self.h.is_multiple_of(factor) || !self.w.is_multiple_of(factor) {
            return Err(Error::Geometry(format!(
                "{}x{} labels not divisible by {factor}",
                self.h, self.w
            )));
        }
        let (h, w) = (self.h / factor, self.w / factor);
        let off = factor / 2;
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(self.get(y * factor + off, x * factor + off));
            }
        }
        Ok(LabelMap { h, w, vocab: self.vocab, data })
    }

    /// Pixel counts per class id (ignore excluded).
    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocab.len()];
        for &v in &self.data {
            if v != IGNORE {
                counts[v as usize] += 1;
            }
        }
        counts
    }
}

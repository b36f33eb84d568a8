use super::{le_u16, le_u32, AxmlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringEncoding {
    Utf8,
    Utf16Le,
}

const UTF8_FLAG: u32 = 0x100;
const SORTED_FLAG: u32 = 0x1;

/// Decoded `0x0001` string pool. Entries whose offset or length falls outside
/// the chunk are kept as `None` and only fail when referenced.
#[derive(Debug, Clone)]
pub struct StringPool {
    strings: Vec<Option<String>>,
    encoding: StringEncoding,
    sorted: bool,
}

impl StringPool {
    /// `chunk` is the whole chunk, header included.
    pub(crate) fn parse(chunk: &[u8], offset: usize) -> Result<Self, AxmlError> {
        let header_size = le_u16(chunk, 2) as usize;
        if header_size < 28 || chunk.len() < 28 {
            return Err(AxmlError::TruncatedChunk {
                offset,
                reason: "string pool header shorter than 28 bytes".into(),
            });
        }
        let count = le_u32(chunk, 8) as usize;
        let style_count = le_u32(chunk, 12) as usize;
        let flags = le_u32(chunk, 16);
        let strings_start = le_u32(chunk, 20) as usize;

        let table_end = count
            .checked_add(style_count)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(header_size));
        if table_end.is_none_or(|end| end > chunk.len()) {
            return Err(AxmlError::TruncatedChunk {
                offset,
                reason: format!("string pool offset table for {count} strings overruns chunk"),
            });
        }

        let encoding = if flags & UTF8_FLAG != 0 {
            StringEncoding::Utf8
        } else {
            StringEncoding::Utf16Le
        };
        let strings = (0..count)
            .map(|i| {
                let rel = le_u32(chunk, header_size + 4 * i) as usize;
                let at = strings_start.checked_add(rel)?;
                match encoding {
                    StringEncoding::Utf8 => decode_utf8(chunk, at),
                    StringEncoding::Utf16Le => decode_utf16(chunk, at),
                }
            })
            .collect();

        Ok(Self {
            strings,
            encoding,
            sorted: flags & SORTED_FLAG != 0,
        })
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn encoding(&self) -> StringEncoding {
        self.encoding
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn get(&self, index: u32) -> Result<&str, AxmlError> {
        match self.strings.get(index as usize) {
            None => Err(AxmlError::StringIndexOutOfRange {
                index,
                count: self.strings.len(),
            }),
            Some(None) => Err(AxmlError::MalformedString(index)),
            Some(Some(s)) => Ok(s),
        }
    }

    /// `0xFFFFFFFF` means "no string".
    pub fn get_opt(&self, index: u32) -> Result<Option<&str>, AxmlError> {
        if index == u32::MAX {
            Ok(None)
        } else {
            self.get(index).map(Some)
        }
    }

    /// Every decodable string, in pool order.
    pub fn strings(&self) -> impl Iterator<Item = &str> {
        self.strings.iter().filter_map(|s| s.as_deref())
    }
}

fn decode_utf16(chunk: &[u8], at: usize) -> Option<String> {
    let first = read_u16(chunk, at)? as usize;
    let (len, data) = if first & 0x8000 != 0 {
        let second = read_u16(chunk, at + 2)? as usize;
        (((first & 0x7FFF) << 16) | second, at + 4)
    } else {
        (first, at + 2)
    };
    let end = data.checked_add(len.checked_mul(2)?)?;
    let bytes = chunk.get(data..end)?;
    let units: Vec<u16> = bytes
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    // Unpaired surrogates become U+FFFD.
    Some(String::from_utf16_lossy(&units))
}

fn decode_utf8(chunk: &[u8], at: usize) -> Option<String> {
    let (_, at) = read_utf8_len(chunk, at)?;
    let (len, at) = read_utf8_len(chunk, at)?;
    let bytes = chunk.get(at..at.checked_add(len)?)?;
    Some(String::from_utf8_lossy(bytes).into_owned())
}

fn read_utf8_len(chunk: &[u8], at: usize) -> Option<(usize, usize)> {
    let first = *chunk.get(at)? as usize;
    if first & 0x80 != 0 {
        let second = *chunk.get(at + 1)? as usize;
        Some((((first & 0x7F) << 8) | second, at + 2))
    } else {
        Some((first, at + 1))
    }
}

fn read_u16(chunk: &[u8], at: usize) -> Option<u16> {
    let b = chunk.get(at..at.checked_add(2)?)?;
    Some(u16::from_le_bytes([b[0], b[1]]))
}

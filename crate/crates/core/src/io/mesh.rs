//! Vertex-only mesh readers. Faces and attributes are ignored.

/// Line number (0 when unknown) and message.
pub type ParseError = (usize, String);

/// Vertex positions from ASCII OBJ `v` lines, in file units.
pub fn parse_obj(text: &str) -> Result<Vec<[f64; 3]>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        if tok.next() != Some("v") {
            continue;
        }
        let mut p = [0.0; 3];
        for slot in &mut p {
            let t = tok.next().ok_or((i + 1, "vertex needs 3 coordinates".to_string()))?;
            *slot = t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or((i + 1, format!("bad coordinate '{t}'")))?;
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Vertex positions from an ASCII or binary little-endian PLY, in file
/// units. Errors carry the 1-based header line where applicable (0 for
/// body errors).
pub fn parse_ply(bytes: &[u8]) -> Result<Vec<[f64; 3]>, ParseError> {
    let (elements, binary, body) = parse_header(bytes)?;
    let vertex = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or((0, "no vertex element".to_string()))?;
    let axis = |name: &str| {
        elements[vertex]
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar(n, _) if n == name))
            .ok_or((0, format!("vertex element has no '{name}' property")))
    };
    let xyz = [axis("x")?, axis("y")?, axis("z")?];

    let mut reader: Box<dyn FnMut(Scalar) -> Result<f64, ParseError> + '_> = if binary {
        let mut pos = 0usize;
        Box::new(move |s: Scalar| {
            let end = pos + s.size();
            let chunk = body.get(pos..end).ok_or((0, "binary body is truncated".to_string()))?;
            pos = end;
            Ok(s.read_le(chunk))
        })
    } else {
        let text = std::str::from_utf8(body).map_err(|_| (0, "ascii body is not UTF-8".to_string()))?;
        let mut tokens = text.split_ascii_whitespace();
        Box::new(move |_| {
            let t = tokens.next().ok_or((0, "ascii body ends early".to_string()))?;
            t.parse::<f64>().map_err(|_| (0, format!("bad number '{t}'")))
        })
    };

    let mut out = Vec::new();
    for (ei, element) in elements.iter().enumerate() {
        if ei > vertex {
            break;
        }
        let mut values = vec![0.0; element.properties.len()];
        for _ in 0..element.count {
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar(_, s) => values[pi] = reader(*s)?,
                    Property::List(count_type, item_type) => {
                        let n = reader(*count_type)?;
                        if !(n >= 0.0 && n.fract() == 0.0) {
                            return Err((0, format!("bad list length {n}")));
                        }
                        for _ in 0..n as usize {
                            reader(*item_type)?;
                        }
                    }
                }
            }
            if ei == vertex {
                let p = xyz.map(|i| values[i]);
                if p.iter().any(|v| !v.is_finite()) {
                    return Err((0, "non-finite vertex coordinate".to_string()));
                }
                out.push(p);
            }
        }
    }
    Ok(out)
}

fn parse_header(bytes: &[u8]) -> Result<(Vec<Element>, bool, &[u8]), ParseError> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut elements: Vec<Element> = Vec::new();
    let mut format: Option<bool> = None;
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or((line_no + 1, "header is not terminated by end_header".to_string()))?;
        line_no += 1;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| (line_no, "header is not UTF-8".to_string()))?
            .trim_end_matches('\r')
            .trim();
        pos += nl + 1;
        let err = |m: &str| (line_no, m.to_string());
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            _ if line_no == 1 => {
                if line != "ply" {
                    return Err(err("missing 'ply' magic"));
                }
            }
            Some("format") => {
                format = Some(match tok.get(1).copied() {
                    Some("ascii") => false,
                    Some("binary_little_endian") => true,
                    Some(other) => return Err(err(&format!("unsupported format '{other}'"))),
                    None => return Err(err("format line is empty")),
                })
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) else {
                    return Err(err("malformed element line"));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or(err("property before any element"))?;
                let prop = if tok.get(1) == Some(&"list") {
                    match (
                        tok.get(2).and_then(|t| Scalar::parse(t)),
                        tok.get(3).and_then(|t| Scalar::parse(t)),
                    ) {
                        (Some(c), Some(i)) if tok.len() == 5 => Property::List(c, i),
                        _ => return Err(err("malformed list property")),
                    }
                } else {
                    match (tok.get(1).and_then(|t| Scalar::parse(t)), tok.get(2)) {
                        (Some(s), Some(name)) if tok.len() == 3 => Property::Scalar(name.to_string(), s),
                        _ => return Err(err("malformed property")),
                    }
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(err(&format!("unknown header keyword '{other}'"))),
        }
    }
    let binary = format.ok_or((line_no, "missing format line".to_string()))?;
    Ok((elements, binary, &bytes[pos..]))
}

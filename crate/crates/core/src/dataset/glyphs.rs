//! Built-in A–Z stroke skeletons on a 16×24 design grid.
//!
//! Each glyph is a list of polylines in pixel coordinates (x right, y down);
//! pixel `(i, j)` has its centre at `(i + 0.5, j + 0.5)`.

pub const GLYPH_WIDTH: usize = 16;
pub const GLYPH_HEIGHT: usize = 24;
/// A pixel is inked when its centre lies within this distance of a stroke.
pub const PEN_RADIUS: f64 = 1.0;

pub type Point = (f64, f64);

const O_RING: &[Point] = &[
    (5.0, 1.5),
    (11.0, 1.5),
    (14.0, 4.5),
    (14.0, 19.5),
    (11.0, 22.5),
    (5.0, 22.5),
    (2.0, 19.5),
    (2.0, 4.5),
    (5.0, 1.5),
];
const P_BOWL: &[Point] = &[
    (2.0, 22.5),
    (2.0, 1.5),
    (11.0, 1.5),
    (14.0, 4.0),
    (14.0, 10.0),
    (11.0, 12.5),
    (2.0, 12.5),
];
const C_ARC: &[Point] = &[
    (14.0, 4.0),
    (11.5, 1.5),
    (5.0, 1.5),
    (2.0, 4.5),
    (2.0, 19.5),
    (5.0, 22.5),
    (11.5, 22.5),
    (14.0, 20.0),
];

/// Stroke skeleton of an uppercase letter, or `None` outside `A..=Z`.
pub fn skeleton(letter: char) -> Option<Vec<Vec<Point>>> {
    let strokes: Vec<&[Point]> = match letter {
        'A' => vec![&[(1.5, 22.5), (8.0, 1.5), (14.5, 22.5)], &[(4.5, 14.0), (11.5, 14.0)]],
        'B' => vec![
            &[(2.0, 1.5), (2.0, 22.5)],
            &[
                (2.0, 1.5),
                (10.0, 1.5),
                (13.0, 3.5),
                (13.0, 9.5),
                (10.0, 11.5),
                (2.0, 11.5),
            ],
            &[(10.0, 11.5), (14.0, 13.5), (14.0, 20.5), (11.0, 22.5), (2.0, 22.5)],
        ],
        'C' => vec![C_ARC],
        'D' => vec![
            &[(2.0, 1.5), (2.0, 22.5)],
            &[
                (2.0, 1.5),
                (9.0, 1.5),
                (14.0, 6.0),
                (14.0, 18.0),
                (9.0, 22.5),
                (2.0, 22.5),
            ],
        ],
        'E' => vec![
            &[(14.0, 1.5), (2.0, 1.5), (2.0, 22.5), (14.0, 22.5)],
            &[(2.0, 12.0), (11.0, 12.0)],
        ],
        'F' => vec![&[(14.0, 1.5), (2.0, 1.5), (2.0, 22.5)], &[(2.0, 12.0), (11.0, 12.0)]],
        'G' => vec![C_ARC, &[(14.0, 20.0), (14.0, 13.0), (9.0, 13.0)]],
        'H' => vec![
            &[(2.0, 1.5), (2.0, 22.5)],
            &[(14.0, 1.5), (14.0, 22.5)],
            &[(2.0, 12.0), (14.0, 12.0)],
        ],
        'I' => vec![
            &[(4.0, 1.5), (12.0, 1.5)],
            &[(8.0, 1.5), (8.0, 22.5)],
            &[(4.0, 22.5), (12.0, 22.5)],
        ],
        'J' => vec![
            &[(6.0, 1.5), (14.0, 1.5)],
            &[(11.0, 1.5), (11.0, 19.5), (8.5, 22.5), (4.5, 22.5), (2.0, 19.5)],
        ],
        'K' => vec![
            &[(2.0, 1.5), (2.0, 22.5)],
            &[(14.0, 1.5), (2.0, 14.0)],
            &[(6.0, 10.0), (14.0, 22.5)],
        ],
        'L' => vec![&[(2.0, 1.5), (2.0, 22.5), (14.0, 22.5)]],
        'M' => vec![&[(1.5, 22.5), (1.5, 1.5), (8.0, 14.0), (14.5, 1.5), (14.5, 22.5)]],
        'N' => vec![&[(2.0, 22.5), (2.0, 1.5), (14.0, 22.5), (14.0, 1.5)]],
        'O' => vec![O_RING],
        'P' => vec![P_BOWL],
        'Q' => vec![O_RING, &[(9.0, 16.0), (14.5, 22.5)]],
        'R' => vec![P_BOWL, &[(8.0, 12.5), (14.0, 22.5)]],
        'S' => vec![&[
            (14.0, 4.0),
            (11.5, 1.5),
            (4.5, 1.5),
            (2.0, 4.0),
            (2.0, 9.0),
            (4.5, 11.5),
            (11.5, 12.5),
            (14.0, 15.0),
            (14.0, 20.0),
            (11.5, 22.5),
            (4.5, 22.5),
            (2.0, 20.0),
        ]],
        'T' => vec![&[(1.5, 1.5), (14.5, 1.5)], &[(8.0, 1.5), (8.0, 22.5)]],
        'U' => vec![&[
            (2.0, 1.5),
            (2.0, 19.5),
            (5.0, 22.5),
            (11.0, 22.5),
            (14.0, 19.5),
            (14.0, 1.5),
        ]],
        'V' => vec![&[(1.5, 1.5), (8.0, 22.5), (14.5, 1.5)]],
        'W' => vec![&[(1.5, 1.5), (4.5, 22.5), (8.0, 9.0), (11.5, 22.5), (14.5, 1.5)]],
        'X' => vec![&[(2.0, 1.5), (14.0, 22.5)], &[(14.0, 1.5), (2.0, 22.5)]],
        'Y' => vec![&[(1.5, 1.5), (8.0, 12.0)], &[(14.5, 1.5), (8.0, 12.0), (8.0, 22.5)]],
        'Z' => vec![&[(2.0, 1.5), (14.0, 1.5), (2.0, 22.5), (14.0, 22.5)]],
        _ => return None,
    };
    Some(strokes.into_iter().map(<[Point]>::to_vec).collect())
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Ink mask of `strokes` on a `width × height` canvas, row-major.
pub fn rasterize(strokes: &[Vec<Point>], width: usize, height: usize) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            let c = (x as f64 + 0.5, y as f64 + 0.5);
            mask[y * width + x] = strokes.iter().any(|line| {
                if line.len() == 1 {
                    return segment_distance(c, line[0], line[0]) <= PEN_RADIUS;
                }
                line.windows(2).any(|s| segment_distance(c, s[0], s[1]) <= PEN_RADIUS)
            });
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_letter_has_ink_inside_the_grid() {
        for letter in 'A'..='Z' {
            let strokes = skeleton(letter).unwrap();
            for p in strokes.iter().flatten() {
                assert!(p.0 > 0.0 && p.0 < GLYPH_WIDTH as f64, "{letter}");
                assert!(p.1 > 0.0 && p.1 < GLYPH_HEIGHT as f64, "{letter}");
            }
            let ink = rasterize(&strokes, GLYPH_WIDTH, GLYPH_HEIGHT)
                .iter()
                .filter(|&&b| b)
                .count();
            assert!(ink > 20, "{letter}: {ink}");
        }
        assert!(skeleton('a').is_none());
        assert!(skeleton('1').is_none());
    }

    #[test]
    fn letters_are_distinct() {
        let masks: Vec<_> = ('A'..='Z')
            .map(|l| rasterize(&skeleton(l).unwrap(), GLYPH_WIDTH, GLYPH_HEIGHT))
            .collect();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                assert_ne!(masks[i], masks[j]);
            }
        }
    }
}

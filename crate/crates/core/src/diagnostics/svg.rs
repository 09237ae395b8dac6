//! Minimal SVG writer. Output is a pure function of the calls made, so the
//! same figure always serializes to the same bytes.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Coordinates rounded to two decimals.
pub fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub struct Svg {
    body: String,
}

impl Svg {
    pub fn new(title: &str) -> Self {
        let mut svg = Svg {
            body: String::new(),
        };
        svg.text(WIDTH / 2.0, 28.0, title, "middle", 18.0, "title");
        svg
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn text(&mut self, x: f64, y: f64, content: &str, anchor: &str, size: f64, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{}" y="{}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            px(x),
            px(y),
            escape(content)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, attrs: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" {attrs}/>"#,
            px(x1),
            px(y1),
            px(x2),
            px(y2)
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" {attrs}/>"#,
            px(x),
            px(y),
            px(w.max(0.0)),
            px(h.max(0.0))
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, attrs: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" {attrs}/>"#,
            px(cx),
            px(cy),
            px(r)
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], attrs: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", px(x), px(y)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" {attrs}/>"#,
            pts.join(" ")
        );
    }

    /// A centered notice for figures without data.
    pub fn message(&mut self, msg: &str) {
        self.text(WIDTH / 2.0, HEIGHT / 2.0, msg, "middle", 16.0, "message");
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = WIDTH,
            h = HEIGHT
        )
    }
}

/// A plotting region with data ranges mapped onto a pixel box.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Panel {
    pub fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.left + (v - lo) / (hi - lo) * self.width
    }

    pub fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.top + self.height - (v - lo) / (hi - lo) * self.height
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    /// Opens a `<g>` carrying the panel's axis ranges as data attributes,
    /// draws the frame, ticks and title. Close it with [`Panel::end`].
    pub fn begin(&self, svg: &mut Svg, id: &str, title: &str, y_ticks: bool) {
        svg.raw(&format!(
            r#"<g class="panel" data-panel="{}" data-xmin="{}" data-xmax="{}" data-ymin="{}" data-ymax="{}">"#,
            escape(id),
            self.x_range.0,
            self.x_range.1,
            self.y_range.0,
            self.y_range.1
        ));
        svg.rect(
            self.left,
            self.top,
            self.width,
            self.height,
            r##"class="frame" fill="none" stroke="#444" stroke-width="1""##,
        );
        svg.text(
            self.left + self.width / 2.0,
            self.top - 8.0,
            title,
            "middle",
            13.0,
            "panel-title",
        );
        for k in 0..=4 {
            let v = self.x_range.0 + (self.x_range.1 - self.x_range.0) * k as f64 / 4.0;
            let x = self.x(v);
            svg.line(
                x,
                self.bottom(),
                x,
                self.bottom() + 4.0,
                r##"stroke="#444""##,
            );
            svg.text(
                x,
                self.bottom() + 16.0,
                &tick_label(v),
                "middle",
                10.0,
                "tick",
            );
        }
        if y_ticks {
            for k in 0..=4 {
                let v = self.y_range.0 + (self.y_range.1 - self.y_range.0) * k as f64 / 4.0;
                let y = self.y(v);
                svg.line(self.left - 4.0, y, self.left, y, r##"stroke="#444""##);
                svg.text(
                    self.left - 6.0,
                    y + 3.0,
                    &tick_label(v),
                    "end",
                    10.0,
                    "tick",
                );
            }
        }
    }

    pub fn end(&self, svg: &mut Svg) {
        svg.raw("</g>");
    }
}

pub fn tick_label(v: f64) -> String {
    let s = if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    };
    if s.starts_with('-')
        && s.trim_start_matches('-')
            .chars()
            .all(|c| c == '0' || c == '.')
    {
        s[1..].to_string()
    } else {
        s
    }
}

//! Plain-`f64` reimplementation of the network, used as an oracle.
#![allow(dead_code)]

use slat::model::{positional_encoding, SlatConfig, SlatModel};
use slat::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub r: usize,
    pub c: usize,
    pub d: Vec<f64>,
}

impl Mat {
    pub fn from(t: &Tensor) -> Mat {
        let (r, c) = match t.shape() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            s => panic!("unexpected shape {s:?}"),
        };
        Mat {
            r,
            c,
            d: t.data().to_vec(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.c + j]
    }

    pub fn mm(&self, o: &Mat) -> Mat {
        assert_eq!(self.c, o.r);
        let mut d = vec![0.0; self.r * o.c];
        for i in 0..self.r {
            for j in 0..o.c {
                d[i * o.c + j] = (0..self.c).map(|k| self.at(i, k) * o.at(k, j)).sum();
            }
        }
        Mat {
            r: self.r,
            c: o.c,
            d,
        }
    }

    pub fn t(&self) -> Mat {
        let mut d = vec![0.0; self.r * self.c];
        for i in 0..self.r {
            for j in 0..self.c {
                d[j * self.r + i] = self.at(i, j);
            }
        }
        Mat {
            r: self.c,
            c: self.r,
            d,
        }
    }

    pub fn plus(&self, o: &Mat) -> Mat {
        assert_eq!((self.r, self.c), (o.r, o.c));
        let d = self.d.iter().zip(&o.d).map(|(a, b)| a + b).collect();
        Mat {
            r: self.r,
            c: self.c,
            d,
        }
    }

    pub fn plus_row(&self, row: &Mat) -> Mat {
        let d = (0..self.r * self.c)
            .map(|k| self.d[k] + row.d[k % self.c])
            .collect();
        Mat {
            r: self.r,
            c: self.c,
            d,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            r: self.r,
            c: self.c,
            d: self.d.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn hcat(parts: &[Mat]) -> Mat {
        let r = parts[0].r;
        let c = parts.iter().map(|p| p.c).sum();
        let mut d = Vec::with_capacity(r * c);
        for i in 0..r {
            for p in parts {
                d.extend_from_slice(&p.d[i * p.c..(i + 1) * p.c]);
            }
        }
        Mat { r, c, d }
    }

    pub fn vcat(a: &Mat, b: &Mat) -> Mat {
        assert_eq!(a.c, b.c);
        Mat {
            r: a.r + b.r,
            c: a.c,
            d: [a.d.clone(), b.d.clone()].concat(),
        }
    }

    pub fn max_diff(&self, o: &Mat) -> f64 {
        assert_eq!((self.r, self.c), (o.r, o.c));
        self.d
            .iter()
            .zip(&o.d)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn softmax_rows(s: &Mat, allow: &dyn Fn(usize, usize) -> bool) -> Mat {
    let mut out = vec![0.0; s.r * s.c];
    for i in 0..s.r {
        let m = (0..s.c)
            .filter(|&j| allow(i, j))
            .map(|j| s.at(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..s.c)
            .filter(|&j| allow(i, j))
            .map(|j| (s.at(i, j) - m).exp())
            .sum();
        for j in 0..s.c {
            if allow(i, j) {
                out[i * s.c + j] = (s.at(i, j) - m).exp() / z;
            }
        }
    }
    Mat {
        r: s.r,
        c: s.c,
        d: out,
    }
}

pub fn layer_norm(x: &Mat, g: &Mat, b: &Mat, eps: f64) -> Mat {
    let mut d = vec![0.0; x.r * x.c];
    for i in 0..x.r {
        let row = &x.d[i * x.c..(i + 1) * x.c];
        let mu = row.iter().sum::<f64>() / x.c as f64;
        let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / x.c as f64;
        for j in 0..x.c {
            d[i * x.c + j] = (row[j] - mu) / (var + eps).sqrt() * g.d[j] + b.d[j];
        }
    }
    Mat { r: x.r, c: x.c, d }
}

pub type Allow = dyn Fn(usize, usize) -> bool;

pub struct Reference<'a> {
    pub model: &'a SlatModel,
    pub cfg: SlatConfig,
}

impl Reference<'_> {
    pub fn p(&self, name: &str) -> Mat {
        Mat::from(
            self.model
                .params()
                .by_name(name)
                .unwrap_or_else(|| panic!("missing {name}")),
        )
    }

    pub fn linear(&self, name: &str, x: &Mat) -> Mat {
        x.mm(&self.p(&format!("{name}.weight")))
            .plus_row(&self.p(&format!("{name}.bias")))
    }

    pub fn norm(&self, name: &str, x: &Mat) -> Mat {
        layer_norm(
            x,
            &self.p(&format!("{name}.gain")),
            &self.p(&format!("{name}.bias")),
            self.cfg.ln_eps,
        )
    }

    pub fn mha(&self, name: &str, q: &Mat, kv: &Mat, allow: &Allow) -> Mat {
        let scale = 1.0 / (self.cfg.d_model as f64).sqrt();
        let heads: Vec<Mat> = (0..self.cfg.heads)
            .map(|h| {
                let qh = q.mm(&self.p(&format!("{name}.query.{h}")));
                let kh = kv.mm(&self.p(&format!("{name}.key.{h}")));
                let vh = kv.mm(&self.p(&format!("{name}.value.{h}")));
                softmax_rows(&qh.mm(&kh.t()).map(|s| s * scale), allow).mm(&vh)
            })
            .collect();
        Mat::hcat(&heads).mm(&self.p(&format!("{name}.output")))
    }

    pub fn ffn(&self, name: &str, x: &Mat) -> Mat {
        let h = self.linear(&format!("{name}.inner"), x).map(|v| v.max(0.0));
        self.linear(&format!("{name}.outer"), &h)
    }

    pub fn encoder_path(&self, path: &str, embed: &str, x: &Mat, allow: &Allow) -> Mat {
        let pe = Mat::from(&positional_encoding(x.r, self.cfg.d_model));
        let mut h = self.linear(embed, x).plus(&pe);
        for i in 0..self.cfg.encoder_blocks {
            let b = format!("{path}.{i}");
            h = h.plus(&self.mha(
                &format!("{b}.attn"),
                &self.norm(&format!("{b}.attn_norm"), &h),
                &self.norm(&format!("{b}.attn_norm"), &h),
                allow,
            ));
            h = h.plus(&self.ffn(
                &format!("{b}.ffn"),
                &self.norm(&format!("{b}.ffn_norm"), &h),
            ));
        }
        h
    }

    pub fn fused(&self, x: &Mat, allow: &Allow) -> Mat {
        let time = self.encoder_path("time_encoder", "time_embed", x, allow);
        let sensor = self.encoder_path("sensor_encoder", "sensor_embed", &x.t(), allow);
        self.p("fusion").t().mm(&Mat::vcat(&time, &sensor))
    }

    pub fn decode(&self, recent: &Mat, memory: &Mat) -> Mat {
        let all = |_: usize, _: usize| true;
        let mut y = self.linear("decoder_embed", recent);
        for i in 0..self.cfg.decoder_blocks {
            let b = format!("decoder.{i}");
            let h = self.norm(&format!("{b}.self_norm"), &y);
            y = y.plus(&self.mha(&format!("{b}.self_attn"), &h, &h, &all));
            let h = self.norm(&format!("{b}.cross_norm"), &y);
            y = y.plus(&self.mha(&format!("{b}.cross_attn"), &h, memory, &all));
            y = y.plus(&self.ffn(
                &format!("{b}.ffn"),
                &self.norm(&format!("{b}.ffn_norm"), &y),
            ));
        }
        y
    }

    pub fn forward(&self, x: &Mat, recent: &Mat, allow: &Allow) -> f64 {
        let dec = self.decode(recent, &self.fused(x, allow));
        let flat = Mat {
            r: 1,
            c: dec.r * dec.c,
            d: dec.d,
        };
        let h = self.linear("head.hidden", &flat).map(|v| v.max(0.0));
        let out = self.linear("head.out", &h);
        assert_eq!((out.r, out.c), (1, 1));
        out.d[0]
    }
}

use serde::{Serialize, Serializer};

/// Named measure values, in bits, for one protocol and distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub protocol: String,
    pub distribution: String,
    pub cc: u64,
    /// Exact rational expected communication.
    pub acc: String,
    #[serde(serialize_with = "ser_bits")]
    pub acc_bits: f64,
    #[serde(serialize_with = "ser_bits")]
    pub ic: f64,
    #[serde(serialize_with = "ser_bits")]
    pub pic: f64,
    #[serde(serialize_with = "ser_bits")]
    pub pic_random_term: f64,
    #[serde(serialize_with = "ser_opt_bits")]
    pub privacy_leakage: Option<f64>,
    #[serde(serialize_with = "ser_bits")]
    pub transcript_entropy: f64,
    #[serde(serialize_with = "ser_bits")]
    pub spy_info: f64,
    pub tolerance: f64,
}

/// Rounds to 9 decimal places, mapping -0 to 0.
pub fn round_bits(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Formats a bit value with 9 decimal places.
pub fn format_bits(v: f64) -> String {
    format!("{:.9}", round_bits(v))
}

pub(crate) fn ser_bits<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_bits(*v))
}

pub(crate) fn ser_opt_bits<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&round_bits(*v)),
        None => s.serialize_none(),
    }
}

impl MeasureReport {
    /// Whether ic + random term matches pic within the report tolerance.
    pub fn decomposition_holds(&self) -> bool {
        (self.ic + self.pic_random_term - self.pic).abs() <= self.tolerance
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(self).expect("report serializes");
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k:<20} {v}\n"));
        line("protocol", self.protocol.clone());
        line("distribution", self.distribution.clone());
        line("cc", self.cc.to_string());
        line(
            "acc",
            format!("{} ({})", self.acc, format_bits(self.acc_bits)),
        );
        line("ic", format_bits(self.ic));
        line("pic", format_bits(self.pic));
        line("pic_random_term", format_bits(self.pic_random_term));
        line(
            "privacy_leakage",
            self.privacy_leakage
                .map(format_bits)
                .unwrap_or_else(|| "n/a".into()),
        );
        line("transcript_entropy", format_bits(self.transcript_entropy));
        line("spy_info", format_bits(self.spy_info));
        line("tolerance", format!("{:e}", self.tolerance));
        out
    }
}

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{month_of, FixtureConfig};
use crate::corpus::StationId;
use crate::error::Result;
use crate::metrics::PanelRecord;

const ORDER: [&str; 6] = ["ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC"];

#[derive(Clone, Copy, PartialEq)]
enum Habit {
    Broadcast(usize),
    Right,
    Left,
    Mixed,
    Light,
}

impl Habit {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        match rng.gen::<f64>() {
            r if r < 0.35 => Habit::Broadcast(rng.gen_range(0..3)),
            r if r < 0.47 => Habit::Right,
            r if r < 0.60 => Habit::Left,
            r if r < 0.75 => Habit::Mixed,
            _ => Habit::Light,
        }
    }

    fn station_weights(self, rng: &mut ChaCha8Rng) -> [f64; 6] {
        let mut w = match self {
            Habit::Broadcast(fav) => {
                let mut w = [0.15, 0.15, 0.15, 0.04, 0.03, 0.03];
                w[fav] = 0.6;
                w
            }
            Habit::Right => [0.05, 0.05, 0.05, 0.05, 0.75, 0.02],
            Habit::Left => [0.05, 0.05, 0.05, 0.35, 0.02, 0.45],
            Habit::Mixed | Habit::Light => [1.0; 6],
        };
        for x in &mut w {
            *x *= rng.gen_range(0.5..1.5);
        }
        w
    }
}

/// Monthly records for a panel whose broadcast viewers slowly drift to
/// watching little or no news.
pub fn generate_panel(config: &FixtureConfig, rng: &mut ChaCha8Rng) -> Result<Vec<PanelRecord>> {
    let stations: Vec<StationId> = ORDER.iter().map(|s| StationId::new_unchecked(*s)).collect();
    let mut out = Vec::new();
    for p in 0..config.panelists {
        let mut habit = Habit::draw(rng);
        let weight = f64::from(rng.gen_range(500u32..5000));
        let appetite: f64 = rng.gen_range(60.0..900.0);
        for m in 0..config.panel_months {
            let date = config
                .panel_start
                .checked_add_months(chrono::Months::new(m))
                .expect("panel months stay in range");
            if let Habit::Broadcast(_) = habit {
                match rng.gen::<f64>() {
                    r if r < 0.008 => habit = Habit::Light,
                    r if r < 0.010 => habit = Habit::Mixed,
                    _ => {}
                }
            }
            let news = if habit == Habit::Light {
                rng.gen_range(0..45u32)
            } else {
                (appetite * rng.gen_range(0.7..1.3)) as u32
            };
            let tracked = (f64::from(news) * rng.gen_range(0.6..0.95)) as u32;
            let w = habit.station_weights(rng);
            let sum: f64 = w.iter().sum();
            let minutes = stations
                .iter()
                .zip(w)
                .map(|(s, x)| (s.clone(), (f64::from(tracked) * x / sum).floor() as u32))
                .collect();
            out.push(PanelRecord {
                panelist_id: format!("p{p:05}"),
                month: month_of(date),
                minutes,
                total_news_minutes: news,
                total_tv_minutes: news + rng.gen_range(300..3000),
                weight,
            });
        }
    }
    Ok(out)
}

//! Stepped resize plans for the in-place scaling overhead experiments.
//!
//! Step boundaries are multiples of the step size, so a 100m plan starting at
//! 1m visits 100m, 200m, … and a 1000m plan descending from 6000m visits
//! 5000m, …, 1000m before the final step to the target.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cpu::MilliCpu;
use crate::error::{Error, Result};
use crate::resize::Direction;

pub const PLAN_HEADER: [&str; 4] = ["step_index", "from_mcpu", "to_mcpu", "timed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// Each step starts where the previous one ended.
    Incremental,
    /// Every timed step starts from the initial value; untimed resets return there.
    Cumulative,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Incremental => "incremental",
            Pattern::Cumulative => "cumulative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub from: MilliCpu,
    pub to: MilliCpu,
    pub timed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResizePlan {
    pub step_size: MilliCpu,
    pub pattern: Pattern,
    pub direction: Direction,
    pub initial: MilliCpu,
    pub target: MilliCpu,
    pub steps: Vec<PlanStep>,
}

impl ResizePlan {
    /// Stable identifier, e.g. `100m-incremental-up-1m-1000m`.
    pub fn id(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}",
            self.step_size,
            self.pattern,
            self.direction.as_str(),
            self.initial,
            self.target
        )
    }

    pub fn timed_steps(&self) -> impl Iterator<Item = (usize, &PlanStep)> {
        self.steps.iter().enumerate().filter(|(_, s)| s.timed)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(PLAN_HEADER)?;
        for (i, s) in self.steps.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.from.get().to_string(),
                s.to.get().to_string(),
                s.timed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<plan>", e))?;
        Ok(())
    }

    /// Reads a plan file. Metadata is inferred: the first step's origin is
    /// the initial value, the last timed step's target is the target.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().ne(PLAN_HEADER) {
            return Err(Error::Format {
                line: 1,
                message: format!("expected header `{}`", PLAN_HEADER.join(",")),
            });
        }
        let mut steps = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let bad = |m: String| Error::Format { line, message: m };
            let mcpu = |i: usize| -> Result<MilliCpu> {
                rec[i]
                    .parse::<u32>()
                    .map_err(|_| bad(format!("`{}` is not an integer", &rec[i])))
                    .and_then(|v| MilliCpu::new(v).map_err(|e| bad(e.to_string())))
            };
            let timed = match &rec[3] {
                "true" | "1" => true,
                "false" | "0" => false,
                other => return Err(bad(format!("`{other}` is not a boolean"))),
            };
            steps.push(PlanStep {
                from: mcpu(1)?,
                to: mcpu(2)?,
                timed,
            });
        }
        let first = steps
            .first()
            .ok_or_else(|| Error::EmptyInput("plan has no steps".into()))?;
        let last_timed = steps
            .iter()
            .rev()
            .find(|s| s.timed)
            .ok_or_else(|| Error::EmptyInput("plan has no timed steps".into()))?;
        let initial = first.from;
        let target = last_timed.to;
        let pattern = if steps.iter().any(|s| !s.timed) {
            Pattern::Cumulative
        } else {
            Pattern::Incremental
        };
        let step_size = MilliCpu::new(first.from.get().abs_diff(first.to.get()).max(1))?;
        Ok(ResizePlan {
            step_size,
            pattern,
            direction: Direction::of(initial, target),
            initial,
            target,
            steps,
        })
    }
}

/// Boundary values strictly between `initial` and `target`, followed by `target`.
fn boundaries(step: u32, initial: u32, target: u32) -> Vec<u32> {
    let mut out = Vec::new();
    if target > initial {
        let mut b = (initial / step + 1) * step;
        while b < target {
            out.push(b);
            b += step;
        }
    } else {
        let mut b = if initial.is_multiple_of(step) {
            initial - step
        } else {
            initial / step * step
        };
        while b > target && b > 0 {
            out.push(b);
            b -= step;
        }
    }
    out.push(target);
    out
}

pub fn resize_plan(
    step: u32,
    pattern: Pattern,
    direction: Direction,
    initial: MilliCpu,
    target: MilliCpu,
) -> Result<ResizePlan> {
    if step == 0 {
        return Err(Error::invalid("step size must be positive"));
    }
    if initial == target {
        return Err(Error::invalid("initial and target must differ"));
    }
    if Direction::of(initial, target) != direction {
        return Err(Error::invalid(format!(
            "{initial} → {target} is not a {} plan",
            direction.as_str()
        )));
    }
    let points = boundaries(step, initial.get(), target.get());
    let mut steps = Vec::new();
    match pattern {
        Pattern::Incremental => {
            let mut prev = initial;
            for p in points {
                let to = MilliCpu::m(p);
                steps.push(PlanStep {
                    from: prev,
                    to,
                    timed: true,
                });
                prev = to;
            }
        }
        Pattern::Cumulative => {
            for (i, p) in points.iter().enumerate() {
                let to = MilliCpu::m(*p);
                if i > 0 {
                    let prev = steps.last().map(|s: &PlanStep| s.to).unwrap_or(initial);
                    steps.push(PlanStep {
                        from: prev,
                        to: initial,
                        timed: false,
                    });
                }
                steps.push(PlanStep {
                    from: initial,
                    to,
                    timed: true,
                });
            }
        }
    }
    Ok(ResizePlan {
        step_size: MilliCpu::new(step)?,
        pattern,
        direction,
        initial,
        target,
        steps,
    })
}

/// 5m-granularity incremental plans: up 5m→1000m and down 1000m→5m.
pub fn fine_plan() -> (ResizePlan, ResizePlan) {
    let up = resize_plan(5, Pattern::Incremental, Direction::Up, MilliCpu::m(5), MilliCpu::m(1000));
    let down = resize_plan(5, Pattern::Incremental, Direction::Down, MilliCpu::m(1000), MilliCpu::m(5));
    (up.expect("valid fine plan"), down.expect("valid fine plan"))
}

/// Which starting value the 100m cumulative-down configuration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CumulativeDownStart {
    /// 100m → 1m, as in the plotted measurements.
    #[default]
    Figure,
    /// 1000m → 1m, as in the configuration listing.
    Table,
}

/// The eight overhead-measurement configurations.
pub fn table2_suite(variant: CumulativeDownStart) -> Vec<ResizePlan> {
    use Direction::{Down, Up};
    use Pattern::{Cumulative, Incremental};
    let cum_down_100 = match variant {
        CumulativeDownStart::Figure => 100,
        CumulativeDownStart::Table => 1000,
    };
    let rows: [(u32, Pattern, Direction, u32, u32); 8] = [
        (100, Incremental, Up, 1, 1000),
        (100, Incremental, Down, 1000, 1),
        (100, Cumulative, Up, 1, 1000),
        (100, Cumulative, Down, cum_down_100, 1),
        (1000, Incremental, Up, 1, 6000),
        (1000, Incremental, Down, 6000, 1),
        (1000, Cumulative, Up, 1, 6000),
        (1000, Cumulative, Down, 6000, 1),
    ];
    rows.iter()
        .map(|&(step, pattern, dir, initial, target)| {
            resize_plan(step, pattern, dir, MilliCpu::m(initial), MilliCpu::m(target))
                .expect("suite rows are valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(v: u32) -> MilliCpu {
        MilliCpu::new(v).unwrap()
    }

    fn pairs(plan: &ResizePlan) -> Vec<(u32, u32)> {
        plan.timed_steps().map(|(_, s)| (s.from.get(), s.to.get())).collect()
    }

    #[test]
    fn incremental_up_100() {
        let p = resize_plan(100, Pattern::Incremental, Direction::Up, m(1), m(1000)).unwrap();
        let expect: Vec<(u32, u32)> = std::iter::once((1, 100))
            .chain((1..10).map(|i| (i * 100, (i + 1) * 100)))
            .collect();
        assert_eq!(pairs(&p), expect);
        assert_eq!(p.steps.len(), 10);
    }

    #[test]
    fn cumulative_up_100_resets_between() {
        let p = resize_plan(100, Pattern::Cumulative, Direction::Up, m(1), m(1000)).unwrap();
        let expect: Vec<(u32, u32)> = (1..=10).map(|i| (1, i * 100)).collect();
        assert_eq!(pairs(&p), expect);
        // timed, reset, timed, reset, ..., timed
        assert_eq!(p.steps.len(), 19);
        for (i, s) in p.steps.iter().enumerate() {
            assert_eq!(s.timed, i % 2 == 0);
            if !s.timed {
                assert_eq!(s.to, m(1));
                assert_eq!(s.from, p.steps[i - 1].to);
            }
        }
    }

    #[test]
    fn incremental_down_1000_from_6000() {
        let p = resize_plan(1000, Pattern::Incremental, Direction::Down, m(6000), m(1)).unwrap();
        assert_eq!(
            pairs(&p),
            vec![(6000, 5000), (5000, 4000), (4000, 3000), (3000, 2000), (2000, 1000), (1000, 1)]
        );
    }

    #[test]
    fn oversized_step_gives_single_step() {
        let p = resize_plan(5000, Pattern::Incremental, Direction::Up, m(1), m(1000)).unwrap();
        assert_eq!(pairs(&p), vec![(1, 1000)]);
    }

    #[test]
    fn invalid_plans() {
        assert!(resize_plan(0, Pattern::Incremental, Direction::Up, m(1), m(10)).is_err());
        assert!(resize_plan(5, Pattern::Incremental, Direction::Up, m(10), m(10)).is_err());
        assert!(resize_plan(5, Pattern::Incremental, Direction::Down, m(1), m(10)).is_err());
    }

    #[test]
    fn fine_plans() {
        let (up, down) = fine_plan();
        assert_eq!(up.steps.len(), 199);
        assert_eq!(pairs(&up)[..2], [(5, 10), (10, 15)]);
        assert_eq!(down.steps.len(), 199);
        assert_eq!(*pairs(&down).last().unwrap(), (10, 5));
    }

    #[test]
    fn suite_rows() {
        let suite = table2_suite(CumulativeDownStart::Figure);
        assert_eq!(suite.len(), 8);
        let cum_down = &suite[3];
        assert_eq!((cum_down.pattern, cum_down.direction), (Pattern::Cumulative, Direction::Down));
        assert_eq!((cum_down.initial, cum_down.target), (m(100), m(1)));
        let inc_up_1000 = &suite[4];
        assert_eq!(inc_up_1000.target, m(6000));
        let alt = table2_suite(CumulativeDownStart::Table);
        assert_eq!(alt[3].initial, m(1000));
    }

    #[test]
    fn csv_round_trip() {
        let p = resize_plan(100, Pattern::Cumulative, Direction::Up, m(1), m(1000)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step_index,from_mcpu,to_mcpu,timed\n0,1,100,true\n1,100,1,false\n"));
        let back = ResizePlan::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.steps, p.steps);
        assert_eq!((back.initial, back.target), (p.initial, p.target));
    }

    proptest! {
        #[test]
        fn plans_reach_target_and_stay_in_range(
            step in 1u32..3000,
            a in 1u32..9000,
            b in 1u32..9000,
            cumulative in any::<bool>(),
        ) {
            prop_assume!(a != b);
            let dir = Direction::of(m(a), m(b));
            let pattern = if cumulative { Pattern::Cumulative } else { Pattern::Incremental };
            let p = resize_plan(step, pattern, dir, m(a), m(b)).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let mut current = m(a);
            for s in &p.steps {
                prop_assert_eq!(s.from, current);
                prop_assert!(s.to.get() >= lo && s.to.get() <= hi);
                if s.timed && pattern == Pattern::Cumulative {
                    prop_assert_eq!(s.from, m(a));
                }
                if !s.timed {
                    prop_assert_eq!(s.to, m(a));
                }
                current = s.to;
            }
            prop_assert_eq!(current, m(b));
            let last_timed = p.steps.iter().rev().find(|s| s.timed).unwrap();
            prop_assert_eq!(last_timed.to, m(b));
        }
    }
}

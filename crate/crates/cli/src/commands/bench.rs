use std::time::Instant;

use anyhow::Result;

use jetode_core::node::Mlp;
use jetode_core::rng::{self, RngState};
use jetode_core::taylor::{jet, jet_opcount, nested_jet, nested_opcount, plain_opcount};
use jetode_core::{Autonomous, Tensor};

use super::{Done, Outputs};
use crate::args::BenchJetArgs;
use crate::svg::{Chart, Series};
use crate::table::Table;
use crate::usage;

pub const MAX_ORDER: usize = 10;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn seconds(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

/// Counts are deterministic and go to `bench`; wall times go to the
/// volatile `timing` table.
pub(super) fn run(a: &BenchJetArgs, out: &mut Outputs) -> Result<Done> {
    if a.max_order > MAX_ORDER {
        return Err(usage(format!("--max-order is at most {MAX_ORDER}")));
    }
    if a.repetitions == 0 || a.dim == 0 || a.hidden == 0 {
        return Err(usage("--repetitions, --dim and --hidden must be positive"));
    }
    let mut rng = RngState::new(a.common.seed);
    let mlp = Mlp::init(&mut rng, a.dim, a.hidden);
    let f = Autonomous::new(&mlp, a.dim);
    let x0 = rng::normal(&mut rng, &[1, a.dim + 1]);
    let plain = plain_opcount(&f, &x0)?;

    let mut bench = Table::new(&[
        "order",
        "plain_opcount",
        "jet_opcount",
        "nested_opcount",
        "jet_ratio",
        "nested_ratio",
    ])?;
    let mut timing = Table::new(&["order", "repetitions", "jet_seconds", "nested_seconds"])?;
    let (mut jets, mut nested) = (Vec::new(), Vec::new());
    let mut lines = Vec::new();
    for k in 0..=a.max_order {
        let (j, n) = (jet_opcount(&f, &x0, k)?, nested_opcount(&f, &x0, k)?);
        let ratio = |v: &[u64]| v.last().map_or(f64::NAN, |&p| p as f64);
        let (jr, nr) = (j as f64 / ratio(&jets), n as f64 / ratio(&nested));
        jets.push(j);
        nested.push(n);
        bench.push(vec![k.into(), plain.into(), j.into(), n.into(), jr.into(), nr.into()])?;

        let series: Vec<Tensor> = (0..k).map(|_| Tensor::ones(x0.shape())).collect();
        let jt = seconds(a.repetitions, || jet(&f, &x0, &series).map(drop).map_err(Into::into))?;
        let nt = seconds(a.repetitions, || {
            nested_jet(&f, &x0, &series).map(drop).map_err(Into::into)
        })?;
        timing.push(vec![k.into(), a.repetitions.into(), jt.into(), nt.into()])?;
        lines.push(format!(
            "K {k:>2}  jet ops {j:>9} ({jr:.2}x)  nested ops {n:>10} ({nr:.2}x)  jet {jt:.2e}s  nested {nt:.2e}s"
        ));
    }
    out.table("bench", &bench)?;
    out.volatile_table("timing", &timing)?;
    let pts = |v: &[u64]| -> Vec<(f64, f64)> {
        v.iter().enumerate().map(|(k, &c)| (k as f64, (c as f64).log10())).collect()
    };
    out.chart(
        "bench.svg",
        &Chart {
            title: "Scalar operations per evaluation".into(),
            x_label: "order K".into(),
            y_label: "log10 operation count".into(),
            log_x: false,
            series: vec![
                Series {
                    name: "Taylor mode".into(),
                    points: pts(&jets),
                    scatter: false,
                    color: None,
                },
                Series {
                    name: "nested forward mode".into(),
                    points: pts(&nested),
                    scatter: false,
                    color: None,
                },
            ],
        },
    )?;
    Ok(Done {
        config: serde_json::json!({
            "dynamics": "mlp",
            "dim": a.dim,
            "hidden": a.hidden,
            "input_shape": x0.shape(),
            "max_order": a.max_order,
            "repetitions": a.repetitions,
        }),
        summary: lines,
        failure: None,
    })
}

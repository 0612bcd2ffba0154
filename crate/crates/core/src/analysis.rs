//! Morphometric and hemodynamic statistics of a generated tree, emitted as
//! machine-readable CSV tables.
//!
//! One table row per Strahler order (vessel counts, radius/length moments,
//! total cross-section), a histogram of the orders terminal vessels branch
//! from, a log-linear fit of counts vs order, per-order flow means and the
//! terminal outlet-pressure histogram.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tree::{HemoConfig, VesselTree};
use crate::units;

/// Statistics of all vessels sharing one Strahler order. Standard deviations
/// are population (divide by n).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderStats {
    pub order: u32,
    pub count: usize,
    pub radius_mean: f64,
    pub radius_std: f64,
    pub length_mean: f64,
    pub length_std: f64,
    /// Total cross-sectional area of the order, mm².
    pub area_mm2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MorphometryReport {
    /// One entry per order, contiguous from 0 to the maximum order.
    pub per_order: Vec<OrderStats>,
    /// (parent vessel order, terminal count) pairs, ascending.
    pub aa_parent_hist: Vec<(u32, usize)>,
    /// Least-squares fit of ln(count) against order; None with fewer than
    /// three populated orders.
    pub fit: Option<FitResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HemodynamicsReport {
    /// (order, mean flow μm³/s) pairs, ascending.
    pub per_order_flow_mean: Vec<(u32, f64)>,
    pub aa_pressure_mean_mmhg: f64,
    pub aa_pressure_std_mmhg: f64,
    /// (bin lower edge mmHg, count) pairs, ascending.
    pub aa_pressure_hist: Vec<(f64, usize)>,
    pub bin_width_mmhg: f64,
    /// Smallest node pressure anywhere in the tree, mmHg.
    pub min_node_pressure_mmhg: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Per-order morphometry plus the terminal parent-order histogram and the
/// count fit.
pub fn morphometry(tree: &VesselTree) -> MorphometryReport {
    let orders = tree.strahler_orders();
    let mut by_order: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for e in tree.edge_ids() {
        let order = orders[e].expect("alive edge has an order");
        let entry = by_order.entry(order).or_default();
        entry.0.push(tree.edge(e).radius);
        entry.1.push(tree.edge_length(e));
    }
    let max_order = by_order.keys().max().copied().unwrap_or(0);
    let mut per_order = Vec::new();
    if !by_order.is_empty() {
        for order in 0..=max_order {
            let (radii, lengths) = by_order.get(&order).cloned().unwrap_or_default();
            let (radius_mean, radius_std) = mean_std(&radii);
            let (length_mean, length_std) = mean_std(&lengths);
            let area = radii.iter().map(|r| std::f64::consts::PI * r * r).sum::<f64>() / units::MM2;
            per_order.push(OrderStats {
                order,
                count: radii.len(),
                radius_mean,
                radius_std,
                length_mean,
                length_std,
                area_mm2: area,
            });
        }
    }

    // Which order does each terminal vessel branch from?
    let mut aa_hist: BTreeMap<u32, usize> = BTreeMap::new();
    for n in tree.node_ids() {
        let node = tree.node(n);
        if !node.is_terminal {
            continue;
        }
        let Some(te) = node.parent_edge else { continue };
        let holder = tree.edge(te).parent;
        // Parent vessel: the edge feeding the node the terminal hangs from.
        // Terminals hanging directly off the root have no parent vessel and
        // are not counted.
        if let Some(pe) = tree.node(holder).parent_edge {
            *aa_hist.entry(orders[pe].expect("alive edge has an order")).or_default() += 1;
        }
    }

    let counts: Vec<(u32, usize)> =
        per_order.iter().filter(|s| s.count > 0).map(|s| (s.order, s.count)).collect();
    let fit = log_linear_fit(&counts).ok();

    MorphometryReport { per_order, aa_parent_hist: aa_hist.into_iter().collect(), fit }
}

/// Ordinary least squares of ln(count) against order. Needs at least three
/// populated orders. A perfectly flat series fits exactly (R² = 1).
pub fn log_linear_fit(counts: &[(u32, usize)]) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = counts
        .iter()
        .filter(|&&(_, c)| c > 0)
        .map(|&(o, c)| (o as f64, (c as f64).ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let y_mean = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - y_mean) * (p.1 - y_mean)).sum();
    let ss_res: f64 =
        points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult { slope, intercept, r2 })
}

/// Per-order flow means and the terminal outlet-pressure histogram, mmHg.
pub fn hemodynamics(
    tree: &VesselTree,
    cfg: &HemoConfig,
    bin_width_mmhg: f64,
) -> Result<HemodynamicsReport> {
    if !(bin_width_mmhg > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be > 0, got {bin_width_mmhg}")));
    }
    let orders = tree.strahler_orders();
    let mut flows: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for e in tree.edge_ids() {
        flows.entry(orders[e].unwrap()).or_default().push(tree.edge(e).flow);
    }
    let per_order_flow_mean =
        flows.into_iter().map(|(o, v)| (o, v.iter().sum::<f64>() / v.len() as f64)).collect();

    let pressures = tree.compute_pressures(cfg)?;
    let min_node_pressure_mmhg = pressures
        .values()
        .fold(f64::INFINITY, |acc, &p| acc.min(units::internal_to_mmhg(p)));

    let mut terminal_mmhg = Vec::new();
    for n in tree.node_ids() {
        if tree.node(n).is_terminal {
            terminal_mmhg.push(units::internal_to_mmhg(pressures[&n]));
        }
    }
    let (aa_pressure_mean_mmhg, aa_pressure_std_mmhg) = mean_std(&terminal_mmhg);
    let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
    for &p in &terminal_mmhg {
        *hist.entry((p / bin_width_mmhg).floor() as i64).or_default() += 1;
    }
    Ok(HemodynamicsReport {
        per_order_flow_mean,
        aa_pressure_mean_mmhg,
        aa_pressure_std_mmhg,
        aa_pressure_hist: hist
            .into_iter()
            .map(|(bin, count)| (bin as f64 * bin_width_mmhg, count))
            .collect(),
        bin_width_mmhg,
        min_node_pressure_mmhg,
    })
}

/// Angles (degrees) between each junction's inflow direction and each of its
/// child directions. Junctions with a zero-length incident edge are skipped;
/// the second value counts them.
pub fn branching_angles(tree: &VesselTree) -> (Vec<f64>, usize) {
    let mut angles = Vec::new();
    let mut skipped = 0usize;
    for n in tree.node_ids() {
        let node = tree.node(n);
        let Some(pe) = node.parent_edge else { continue };
        if node.child_edges.is_empty() {
            continue;
        }
        let inflow = node.pos - tree.node(tree.edge(pe).parent).pos;
        let inflow_len = inflow.norm();
        if inflow_len == 0.0 {
            skipped += 1;
            continue;
        }
        let mut junction_ok = true;
        let mut junction_angles = Vec::with_capacity(node.child_edges.len());
        for &ce in &node.child_edges {
            let out = tree.node(tree.edge(ce).child).pos - node.pos;
            let out_len = out.norm();
            if out_len == 0.0 {
                junction_ok = false;
                break;
            }
            let cos = (inflow.dot(out) / (inflow_len * out_len)).clamp(-1.0, 1.0);
            junction_angles.push(cos.acos().to_degrees());
        }
        if junction_ok {
            angles.extend(junction_angles);
        } else {
            skipped += 1;
        }
    }
    (angles, skipped)
}

// ---------------------------------------------------------------------------
// CSV export / import. Schemas:
//   per_order.csv        order,count,radius_mean,radius_std,length_mean,length_std,area_mm2,flow_mean
//   aa_parent_hist.csv   parent_order,count
//   aa_pressure_hist.csv bin_mmHg,count
//   fit.csv              slope,intercept,r2
// ---------------------------------------------------------------------------

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?))
}

/// Writes all four report tables into `dir`.
pub fn write_reports(
    morph: &MorphometryReport,
    hemo: &HemodynamicsReport,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let flow_by_order: BTreeMap<u32, f64> = hemo.per_order_flow_mean.iter().copied().collect();

    let path = dir.join("per_order.csv");
    let mut w = create(&path)?;
    writeln!(w, "order,count,radius_mean,radius_std,length_mean,length_std,area_mm2,flow_mean")
        .map_err(|e| Error::file(&path, e))?;
    for s in &morph.per_order {
        let flow = flow_by_order.get(&s.order).copied().unwrap_or(f64::NAN);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.order, s.count, s.radius_mean, s.radius_std, s.length_mean, s.length_std, s.area_mm2, flow
        )
        .map_err(|e| Error::file(&path, e))?;
    }
    w.flush().map_err(|e| Error::file(&path, e))?;

    let path = dir.join("aa_parent_hist.csv");
    let mut w = create(&path)?;
    writeln!(w, "parent_order,count").map_err(|e| Error::file(&path, e))?;
    for &(order, count) in &morph.aa_parent_hist {
        writeln!(w, "{order},{count}").map_err(|e| Error::file(&path, e))?;
    }
    w.flush().map_err(|e| Error::file(&path, e))?;

    let path = dir.join("aa_pressure_hist.csv");
    let mut w = create(&path)?;
    writeln!(w, "bin_mmHg,count").map_err(|e| Error::file(&path, e))?;
    for &(bin, count) in &hemo.aa_pressure_hist {
        writeln!(w, "{bin},{count}").map_err(|e| Error::file(&path, e))?;
    }
    w.flush().map_err(|e| Error::file(&path, e))?;

    let path = dir.join("fit.csv");
    let mut w = create(&path)?;
    writeln!(w, "slope,intercept,r2").map_err(|e| Error::file(&path, e))?;
    if let Some(fit) = &morph.fit {
        writeln!(w, "{},{},{}", fit.slope, fit.intercept, fit.r2).map_err(|e| Error::file(&path, e))?;
    }
    w.flush().map_err(|e| Error::file(&path, e))?;
    Ok(())
}

/// Reads the tables written by [`write_reports`] back. Flow means and
/// pressure statistics live in the morphometry tables only partially, so the
/// returned hemodynamics report carries what the files hold: per-order flow
/// means from per_order.csv and the pressure histogram (mean/std are
/// recomputed from the histogram midpoints when needed and otherwise NaN).
pub fn read_reports(dir: impl AsRef<Path>) -> Result<(MorphometryReport, HemodynamicsReport)> {
    let dir = dir.as_ref();

    let path = dir.join("per_order.csv");
    let mut per_order = Vec::new();
    let mut per_order_flow_mean = Vec::new();
    let mut rdr = csv::Reader::from_path(&path).map_err(Error::Csv)?;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != 8 {
            return Err(Error::format(&path, line, "expected 8 columns"));
        }
        let f = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(&path, line, format!("bad float `{}`", &record[j])))
        };
        let order: u32 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(&path, line, format!("bad order `{}`", &record[0])))?;
        let count: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::format(&path, line, format!("bad count `{}`", &record[1])))?;
        per_order.push(OrderStats {
            order,
            count,
            radius_mean: f(2)?,
            radius_std: f(3)?,
            length_mean: f(4)?,
            length_std: f(5)?,
            area_mm2: f(6)?,
        });
        if count > 0 {
            per_order_flow_mean.push((order, f(7)?));
        }
    }

    let path = dir.join("aa_parent_hist.csv");
    let mut aa_parent_hist = Vec::new();
    let mut rdr = csv::Reader::from_path(&path).map_err(Error::Csv)?;
    for record in rdr.records() {
        let record = record?;
        aa_parent_hist.push((
            record[0].trim().parse().map_err(|_| Error::format(&path, 0, "bad order"))?,
            record[1].trim().parse().map_err(|_| Error::format(&path, 0, "bad count"))?,
        ));
    }

    let path = dir.join("aa_pressure_hist.csv");
    let mut aa_pressure_hist: Vec<(f64, usize)> = Vec::new();
    let mut rdr = csv::Reader::from_path(&path).map_err(Error::Csv)?;
    for record in rdr.records() {
        let record = record?;
        aa_pressure_hist.push((
            record[0].trim().parse().map_err(|_| Error::format(&path, 0, "bad bin"))?,
            record[1].trim().parse().map_err(|_| Error::format(&path, 0, "bad count"))?,
        ));
    }

    let path = dir.join("fit.csv");
    let mut fit = None;
    let mut rdr = csv::Reader::from_path(&path).map_err(Error::Csv)?;
    for record in rdr.records() {
        let record = record?;
        fit = Some(FitResult {
            slope: record[0].trim().parse().map_err(|_| Error::format(&path, 0, "bad slope"))?,
            intercept: record[1].trim().parse().map_err(|_| Error::format(&path, 0, "bad intercept"))?,
            r2: record[2].trim().parse().map_err(|_| Error::format(&path, 0, "bad r2"))?,
        });
    }

    let bin_width_mmhg = match aa_pressure_hist.as_slice() {
        [] | [_] => 1.0,
        [a, b, ..] => b.0 - a.0,
    };
    Ok((
        MorphometryReport { per_order, aa_parent_hist, fit },
        HemodynamicsReport {
            per_order_flow_mean,
            aa_pressure_mean_mmhg: f64::NAN,
            aa_pressure_std_mmhg: f64::NAN,
            aa_pressure_hist,
            bin_width_mmhg,
            min_node_pressure_mmhg: f64::NAN,
        },
    ))
}

//! Flatten report CSVs into plain columns for gnuplot and friends.

use zmix_core::report::CsvTable;

/// Report kind from the `report: <kind>` comment.
fn kind(t: &CsvTable) -> Option<&str> {
    t.comments
        .iter()
        .find_map(|c| c.strip_prefix("report: "))
        .map(str::trim)
}

fn pick(t: &CsvTable, columns: &[(&str, &str)]) -> Result<CsvTable, String> {
    let idx: Vec<usize> = columns
        .iter()
        .map(|(src, _)| {
            t.column(src)
                .ok_or_else(|| format!("report lacks column {src:?}"))
        })
        .collect::<Result<_, _>>()?;
    let mut out = CsvTable::new(&columns.iter().map(|(_, dst)| *dst).collect::<Vec<_>>());
    for r in &t.rows {
        out.push(idx.iter().map(|&i| r[i].clone()).collect());
    }
    Ok(out)
}

/// Plottable columns of a report table.
pub fn plotdata(text: &str) -> Result<CsvTable, String> {
    let t = CsvTable::parse(text)?;
    let k = kind(&t).ok_or("no `report:` comment; not a report table")?;
    match k {
        "mllt" => {
            let d = t
                .columns
                .iter()
                .filter(|c| c.starts_with('u') && c[1..].parse::<usize>().is_ok())
                .count();
            if d == 0 {
                return Err("mllt report without rescaled columns".into());
            }
            let names: Vec<(String, String)> = (0..d)
                .map(|i| {
                    (
                        format!("u{i}"),
                        if d == 1 {
                            "z/L_n".to_string()
                        } else {
                            format!("z{i}/L_n")
                        },
                    )
                })
                .collect();
            let mut cols: Vec<(&str, &str)> = names
                .iter()
                .map(|(a, b)| (a.as_str(), b.as_str()))
                .collect();
            cols.extend([
                ("empirical", "empirical"),
                ("reference", "reference"),
                ("se", "SE"),
            ]);
            pick(&t, &cols)
        }
        "correlation" => pick(
            &t,
            &[
                ("n", "n"),
                ("estimate", "estimate"),
                ("se", "SE"),
                ("target", "target"),
            ],
        ),
        "cubemix" => pick(
            &t,
            &[
                ("time", "time"),
                ("size", "L"),
                ("estimate", "estimate"),
                ("se", "SE"),
                ("target", "target"),
            ],
        ),
        "discrepancy" => pick(
            &t,
            &[
                ("size", "L"),
                ("deviation", "deviation"),
                ("perturbed_se", "SE"),
                ("mean_abs_discrepancy", "discrepancy"),
                ("discrepancy_se", "discrepancy_SE"),
            ],
        ),
        "escape" => pick(&t, &[("n", "n"), ("fraction", "fraction"), ("se", "SE")]),
        "pingpong_ladder" => pick(
            &t,
            &[
                ("i0", "I0"),
                ("ky_fan", "ky_fan"),
                ("mean", "mean"),
                ("max", "max"),
            ],
        ),
        "energy_quantiles" => pick(
            &t,
            &[
                ("p", "p"),
                ("galton", "galton"),
                ("sde_direct", "sde_direct"),
                ("sde_transformed", "sde_transformed"),
            ],
        ),
        "exact_comparison" => pick(
            &t,
            &[("exact", "exact"), ("empirical", "empirical"), ("se", "SE")],
        ),
        other => Err(format!("report kind {other:?} has no plot mapping")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mllt_maps_to_rescaled_columns() {
        let text = "# report: mllt\nz0,u0,empirical,se,reference,occupancy,excluded,resolved\n-1,-0.5,0.2,0.01,0.21,0.2,false,true\n";
        let out = plotdata(text).unwrap();
        assert_eq!(out.columns, ["z/L_n", "empirical", "reference", "SE"]);
        assert_eq!(out.rows, [["-0.5", "0.2", "0.21", "0.01"]]);
    }

    #[test]
    fn empty_correlation_gives_header_only() {
        let out = plotdata("# report: correlation\nn,estimate,se,target\n").unwrap();
        assert_eq!(out.render(), "n,estimate,SE,target\n");
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(plotdata("").is_err());
        assert!(plotdata("a,b\n1,2\n").is_err());
        assert!(plotdata("# report: correlation\nn,estimate\n1,2\n").is_err());
        assert!(plotdata("# report: mllt\nz0,u0,empirical\n1,2\n").is_err());
    }
}

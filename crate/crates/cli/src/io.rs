use std::fmt::Write as _;
use std::path::Path;

use dcs::generators::{Enumeration, PointTag};
use dcs::Error;

pub fn read(path: &Path) -> anyhow::Result<String> {
    Ok(std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?)
}

pub fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    Ok(std::fs::write(path, text).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?)
}

/// One replica: the plain enumeration CSV. Several: a leading `replica` column.
pub fn ensemble_to_csv(ensemble: &[Enumeration]) -> String {
    if let [single] = ensemble {
        return single.to_csv();
    }
    let mut out = String::from("replica,index,point,component\n");
    for (r, e) in ensemble.iter().enumerate() {
        for (k, (t, tag)) in e.points().iter().zip(e.tags()).enumerate() {
            let _ = writeln!(out, "{r},{},{t:?},{}", k + 1, tag.as_str());
        }
    }
    out
}

fn parse_tag(text: &str) -> Option<PointTag> {
    match text {
        "sample" => Some(PointTag::Sample),
        "poisson" => Some(PointTag::Poisson),
        "walk" => Some(PointTag::Walk),
        _ => None,
    }
}

/// Reads either CSV layout written by [`ensemble_to_csv`]. Replicas must
/// appear in order starting at 0; a replica with no rows is not expressible.
pub fn parse_ensemble_csv(text: &str) -> dcs::Result<Vec<Enumeration>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let with_replica = match header.trim() {
        "index,point,component" => false,
        "replica,index,point,component" => true,
        other => return Err(Error::Parse { line: 1, msg: format!("unexpected header {other:?}") }),
    };
    let mut replicas: Vec<(Vec<f64>, Vec<PointTag>)> = Vec::new();
    for (no, line) in lines {
        let line_no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse { line: line_no, msg: msg.to_string() };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (replica, rest) = if with_replica {
            let r: usize = fields.first().and_then(|f| f.parse().ok()).ok_or_else(|| bad("bad replica index"))?;
            (r, &fields[1..])
        } else {
            (0, &fields[..])
        };
        let [_, point, tag] = rest else { return Err(bad("expected index, point and component")) };
        let point: f64 = point.parse().map_err(|_| bad("bad point"))?;
        let tag = parse_tag(tag).ok_or_else(|| bad("unknown component tag"))?;
        if replica == replicas.len() {
            replicas.push((Vec::new(), Vec::new()));
        } else if replica + 1 != replicas.len() {
            return Err(bad("replicas must be listed in order starting at 0"));
        }
        let entry = replicas.last_mut().expect("pushed above");
        entry.0.push(point);
        entry.1.push(tag);
    }
    replicas
        .into_iter()
        .map(|(points, tags)| {
            let depth = points.len();
            Enumeration::new(points, tags, depth)
        })
        .collect()
}

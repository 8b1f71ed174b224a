//! JSON form of a compressed graph.
//!
//! ```json
//! {"edges":[{"prec":"A1:B6","dep":"C1:C4","pattern":"RR",
//!            "meta":{"hRel":[-2,0],"tRel":[-1,2]},"count":4}],
//!  "rawEdges":4,"rawVertices":8}
//! ```
//!
//! Meta keys appear only when the pattern uses them. Chain edges carry
//! `"chainDir"` inside `meta`.

use std::fmt::Display;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cellspace::{Axis, CellAddr, Offset, Range};
use crate::engine::FormulaGraph;
use crate::graph::{CompressedGraph, GraphError};
use crate::pattern::{ChainDir, CompressedEdge, Pattern, PatternKind, PatternSet};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{0}")]
    Json(#[from] serde_path_to_error::Error<serde_json::Error>),
    #[error("{path}: {reason}")]
    Field { path: String, reason: String },
    #[error("edges[{index}]: {source}")]
    Edge {
        index: usize,
        #[source]
        source: GraphError,
    },
}

mod via_str {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

mod opt_via_str {
    use super::*;

    pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_str(v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        match Option::<String>::deserialize(d)? {
            Some(s) => s.parse().map(Some).map_err(de::Error::custom),
            None => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub edges: Vec<EdgeDoc>,
    #[serde(rename = "rawEdges")]
    pub raw_edges: u64,
    #[serde(rename = "rawVertices")]
    pub raw_vertices: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    #[serde(with = "via_str")]
    pub prec: Range,
    #[serde(with = "via_str")]
    pub dep: Range,
    #[serde(with = "via_str")]
    pub pattern: PatternKind,
    #[serde(default, skip_serializing_if = "MetaDoc::is_empty")]
    pub meta: MetaDoc,
    pub count: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct MetaDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_rel: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_via_str")]
    pub h_fix: Option<CellAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_rel: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_via_str")]
    pub t_fix: Option<CellAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_via_str")]
    pub chain_dir: Option<ChainDir>,
}

impl MetaDoc {
    fn is_empty(&self) -> bool {
        self.h_rel.is_none()
            && self.h_fix.is_none()
            && self.t_rel.is_none()
            && self.t_fix.is_none()
            && self.chain_dir.is_none()
    }
}

fn pair(o: Offset) -> [i32; 2] {
    [o.dc, o.dr]
}

impl From<&CompressedEdge> for EdgeDoc {
    fn from(e: &CompressedEdge) -> Self {
        let p = &e.pattern;
        let chain = p.chain_dir();
        let meta = MetaDoc {
            // a chain's offsets are implied by its direction
            h_rel: p.h_rel().filter(|_| chain.is_none()).map(pair),
            h_fix: p.h_fix(),
            t_rel: p.t_rel().filter(|_| chain.is_none()).map(pair),
            t_fix: p.t_fix(),
            chain_dir: chain,
        };
        EdgeDoc {
            prec: e.prec,
            dep: e.dep,
            pattern: e.kind(),
            meta,
            count: e.count,
        }
    }
}

impl EdgeDoc {
    fn to_edge(&self, index: usize) -> Result<CompressedEdge, ExportError> {
        let m = &self.meta;
        let field = |name: &str, reason: &str| ExportError::Field {
            path: format!("edges[{index}].meta.{name}"),
            reason: reason.to_string(),
        };
        let need_off = |v: Option<[i32; 2]>, name: &str| {
            v.map(|[dc, dr]| Offset::new(dc, dr))
                .ok_or_else(|| field(name, &format!("required for {}", self.pattern)))
        };
        let need_cell = |v: Option<CellAddr>, name: &str| {
            v.ok_or_else(|| field(name, &format!("required for {}", self.pattern)))
        };
        let allowed: &[&str] = match self.pattern {
            PatternKind::Single => &[],
            PatternKind::Rr => &["hRel", "tRel"],
            PatternKind::Rf => &["hRel", "tFix"],
            PatternKind::Fr => &["hFix", "tRel"],
            PatternKind::Ff => &["hFix", "tFix"],
            PatternKind::RrChain => &["chainDir"],
        };
        let present = [
            ("hRel", m.h_rel.is_some()),
            ("hFix", m.h_fix.is_some()),
            ("tRel", m.t_rel.is_some()),
            ("tFix", m.t_fix.is_some()),
            ("chainDir", m.chain_dir.is_some()),
        ];
        if let Some((name, _)) = present.iter().find(|(n, p)| *p && !allowed.contains(n)) {
            return Err(field(name, &format!("not used by {}", self.pattern)));
        }
        let pattern = match self.pattern {
            PatternKind::Single => Pattern::Single,
            PatternKind::Rr => Pattern::Rr {
                h_rel: need_off(m.h_rel, "hRel")?,
                t_rel: need_off(m.t_rel, "tRel")?,
            },
            PatternKind::Rf => Pattern::Rf {
                h_rel: need_off(m.h_rel, "hRel")?,
                t_fix: need_cell(m.t_fix, "tFix")?,
            },
            PatternKind::Fr => Pattern::Fr {
                h_fix: need_cell(m.h_fix, "hFix")?,
                t_rel: need_off(m.t_rel, "tRel")?,
            },
            PatternKind::Ff => Pattern::Ff {
                h_fix: need_cell(m.h_fix, "hFix")?,
                t_fix: need_cell(m.t_fix, "tFix")?,
            },
            PatternKind::RrChain => Pattern::RrChain {
                dir: m
                    .chain_dir
                    .ok_or_else(|| field("chainDir", "required for RRChain"))?,
            },
        };
        Ok(CompressedEdge {
            prec: self.prec,
            dep: self.dep,
            pattern,
            axis: self.dep.run_axis().unwrap_or(Axis::Column),
            count: self.count,
        })
    }
}

impl GraphDoc {
    pub fn from_graph(g: &CompressedGraph) -> Self {
        GraphDoc {
            edges: g.sorted_edges().iter().map(EdgeDoc::from).collect(),
            raw_edges: g.raw_edge_count(),
            raw_vertices: g.raw_vertex_count(),
        }
    }

    /// Rebuilds the graph, checking every edge and both totals.
    pub fn into_graph(self, patterns: PatternSet) -> Result<CompressedGraph, ExportError> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for (index, doc) in self.edges.iter().enumerate() {
            let e = doc.to_edge(index)?;
            crate::graph::validate_edge(&e).map_err(|source| ExportError::Edge { index, source })?;
            edges.push(e);
        }
        let g = CompressedGraph::from_edges(edges, patterns)
            .map_err(|source| ExportError::Edge { index: 0, source })?;
        let stats = g.stats();
        if stats.raw_edges != self.raw_edges {
            return Err(ExportError::Field {
                path: "rawEdges".into(),
                reason: format!("edges represent {} dependencies", stats.raw_edges),
            });
        }
        if stats.raw_vertices != self.raw_vertices {
            return Err(ExportError::Field {
                path: "rawVertices".into(),
                reason: format!("edges represent {} vertices", stats.raw_vertices),
            });
        }
        Ok(g)
    }
}

pub fn export_graph(g: &CompressedGraph) -> String {
    serde_json::to_string(&GraphDoc::from_graph(g)).expect("graph documents always serialize")
}

pub fn export_graph_pretty(g: &CompressedGraph) -> String {
    serde_json::to_string_pretty(&GraphDoc::from_graph(g)).expect("graph documents always serialize")
}

pub fn import_graph(json: &str, patterns: PatternSet) -> Result<CompressedGraph, ExportError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: GraphDoc = serde_path_to_error::deserialize(de)?;
    doc.into_graph(patterns)
}

//! Versioned text form of a [`BoostedEnsemble`]:
//!
//! ```text
//! nrtwin-gbdt 1
//! base_score 0.0042
//! learning_rate 0.1
//! trees 1
//! tree 3
//! split 6 1.5
//! leaf -0.001
//! leaf 0.002
//! ```
//!
//! Each `tree N` line is followed by its N nodes in pre-order.

use std::fmt::Write as _;

use super::{BoostedEnsemble, TreeNode};
use crate::error::{Error, Result};
use crate::telemetry::FEATURE_COUNT;

const MAGIC: &str = "nrtwin-gbdt";
const VERSION: u32 = 1;

fn node_count(t: &TreeNode) -> usize {
    match t {
        TreeNode::Leaf { .. } => 1,
        TreeNode::Split { left, right, .. } => 1 + node_count(left) + node_count(right),
    }
}

fn write_node(out: &mut String, t: &TreeNode) {
    match t {
        TreeNode::Leaf { value } => writeln!(out, "leaf {value}").unwrap(),
        TreeNode::Split {
            feature_index,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "split {feature_index} {threshold}").unwrap();
            write_node(out, left);
            write_node(out, right);
        }
    }
}

pub fn to_text(model: &BoostedEnsemble) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(out, "base_score {}", model.base_score).unwrap();
    writeln!(out, "learning_rate {}", model.learning_rate).unwrap();
    writeln!(out, "trees {}", model.trees.len()).unwrap();
    for t in &model.trees {
        writeln!(out, "tree {}", node_count(t)).unwrap();
        write_node(&mut out, t);
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if !parts.is_empty() {
                return Ok((i + 1, parts));
            }
        }
        Err(Error::Parse {
            line: 0,
            message: "unexpected end of model".into(),
        })
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<(usize, T)>
    where
        T::Err: std::fmt::Display,
    {
        let (line, parts) = self.next()?;
        if parts.len() != 2 || parts[0] != key {
            return Err(Error::Parse {
                line,
                message: format!("expected `{key} <value>`"),
            });
        }
        let v = parts[1].parse::<T>().map_err(|e| Error::Parse {
            line,
            message: format!("{key}: {e}"),
        })?;
        Ok((line, v))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| Error::Parse {
        line,
        message: format!("`{s}`: {e}"),
    })
}

fn read_node(lines: &mut Lines<'_>, budget: &mut usize) -> Result<TreeNode> {
    let (line, parts) = lines.next()?;
    if *budget == 0 {
        return Err(Error::Parse {
            line,
            message: "tree has more nodes than declared".into(),
        });
    }
    *budget -= 1;
    match parts.as_slice() {
        ["leaf", v] => Ok(TreeNode::Leaf {
            value: parse_num(v, line)?,
        }),
        ["split", f, t] => {
            let feature_index: usize = parse_num(f, line)?;
            if feature_index >= FEATURE_COUNT {
                return Err(Error::Parse {
                    line,
                    message: format!("feature index {feature_index} out of range"),
                });
            }
            let threshold: f64 = parse_num(t, line)?;
            if !threshold.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: "non-finite threshold".into(),
                });
            }
            let left = Box::new(read_node(lines, budget)?);
            let right = Box::new(read_node(lines, budget)?);
            Ok(TreeNode::Split {
                feature_index,
                threshold,
                left,
                right,
            })
        }
        _ => Err(Error::Parse {
            line,
            message: "expected `leaf <v>` or `split <feature> <threshold>`".into(),
        }),
    }
}

pub fn from_text(text: &str) -> Result<BoostedEnsemble> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, head) = lines.next()?;
    if head.len() != 2 || head[0] != MAGIC {
        return Err(Error::Parse {
            line,
            message: format!("not a {MAGIC} model"),
        });
    }
    let version: u32 = parse_num(head[1], line)?;
    if version != VERSION {
        return Err(Error::Parse {
            line,
            message: format!("unsupported model version {version}"),
        });
    }
    let (_, base_score) = lines.keyed::<f64>("base_score")?;
    let (_, learning_rate) = lines.keyed::<f64>("learning_rate")?;
    let (_, n_trees) = lines.keyed::<usize>("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let (line, mut budget) = lines.keyed::<usize>("tree")?;
        let tree = read_node(&mut lines, &mut budget)?;
        if budget != 0 {
            return Err(Error::Parse {
                line,
                message: "tree has fewer nodes than declared".into(),
            });
        }
        trees.push(tree);
    }
    Ok(BoostedEnsemble {
        base_score,
        learning_rate,
        trees,
    })
}

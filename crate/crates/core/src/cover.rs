//! Covers: possibly overlapping sets of communities over dense node indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{compare_labels, Graph};

pub type CommunityId = usize;

/// A set of communities with a per-node membership index.
///
/// Community ids are slot indices. A slot whose community lost its last
/// member becomes vacant and is skipped by iteration; [`Cover::compact`]
/// renumbers the live communities densely.
#[derive(Debug, Clone, Default)]
pub struct Cover {
    node_count: usize,
    communities: Vec<Vec<usize>>,
    memberships: Vec<Vec<CommunityId>>,
    live: usize,
}

impl PartialEq for Cover {
    fn eq(&self, other: &Self) -> bool {
        self.node_count == other.node_count && self.canonical() == other.canonical()
    }
}

impl Cover {
    pub fn new(node_count: usize) -> Self {
        Cover {
            node_count,
            communities: Vec::new(),
            memberships: vec![Vec::new(); node_count],
            live: 0,
        }
    }

    /// Builds a cover from raw member lists. Members are sorted and
    /// deduplicated; empty lists are skipped.
    pub fn from_communities<I, C>(node_count: usize, communities: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = usize>,
    {
        let mut cover = Cover::new(node_count);
        for members in communities {
            let members: Vec<usize> = members.into_iter().collect();
            if !members.is_empty() {
                cover.insert_community(members)?;
            }
        }
        Ok(cover)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of live (non-empty) communities.
    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// One past the largest community id ever allocated.
    pub fn slot_count(&self) -> usize {
        self.communities.len()
    }

    pub fn communities(&self) -> impl Iterator<Item = (CommunityId, &[usize])> + '_ {
        self.communities
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(id, m)| (id, m.as_slice()))
    }

    pub fn community(&self, id: CommunityId) -> Option<&[usize]> {
        self.communities
            .get(id)
            .filter(|m| !m.is_empty())
            .map(|m| m.as_slice())
    }

    /// Sorted ids of the communities containing `v`.
    pub fn memberships(&self, v: usize) -> &[CommunityId] {
        &self.memberships[v]
    }

    pub fn membership_count(&self, v: usize) -> usize {
        self.memberships[v].len()
    }

    pub fn contains(&self, id: CommunityId, v: usize) -> bool {
        self.memberships[v].binary_search(&id).is_ok()
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count {
            return Err(Error::NodeOutOfRange {
                node: v,
                node_count: self.node_count,
            });
        }
        Ok(())
    }

    /// Adds a new community, reusing the lowest vacant slot.
    pub fn insert_community(&mut self, mut members: Vec<usize>) -> Result<CommunityId> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::Config("communities must be non-empty".into()));
        }
        for &v in &members {
            self.check_node(v)?;
        }
        let id = self.vacant_slot();
        for &v in &members {
            let pos = self.memberships[v].binary_search(&id).unwrap_err();
            self.memberships[v].insert(pos, id);
        }
        self.communities[id] = members;
        self.live += 1;
        Ok(id)
    }

    /// Lowest vacant community id, allocating a new slot if none is free.
    pub fn vacant_slot(&mut self) -> CommunityId {
        match self.communities.iter().position(|m| m.is_empty()) {
            Some(slot) => slot,
            None => {
                self.communities.push(Vec::new());
                self.communities.len() - 1
            }
        }
    }

    /// Adds `v` to community `id`. A vacant slot is revived as `{v}`.
    pub fn add_node(&mut self, id: CommunityId, v: usize) -> Result<()> {
        self.check_node(v)?;
        let members = self
            .communities
            .get_mut(id)
            .ok_or(Error::UnknownCommunity(id))?;
        match members.binary_search(&v) {
            Ok(_) => Err(Error::AlreadyMember {
                node: v,
                community: id,
            }),
            Err(pos) => {
                if members.is_empty() {
                    self.live += 1;
                }
                members.insert(pos, v);
                let mpos = self.memberships[v].binary_search(&id).unwrap_err();
                self.memberships[v].insert(mpos, id);
                Ok(())
            }
        }
    }

    /// Removes `v` from community `id`; returns whether it was a member.
    pub fn remove_node(&mut self, id: CommunityId, v: usize) -> bool {
        let Some(members) = self.communities.get_mut(id) else {
            return false;
        };
        match members.binary_search(&v) {
            Ok(pos) => {
                members.remove(pos);
                if members.is_empty() {
                    self.live -= 1;
                }
                let mpos = self.memberships[v].binary_search(&id).unwrap();
                self.memberships[v].remove(mpos);
                true
            }
            Err(_) => false,
        }
    }

    /// Removes `v` from every community and returns the ids it belonged to.
    pub fn detach(&mut self, v: usize) -> Vec<CommunityId> {
        let ids = std::mem::take(&mut self.memberships[v]);
        for &id in &ids {
            let members = &mut self.communities[id];
            let pos = members.binary_search(&v).unwrap();
            members.remove(pos);
            if members.is_empty() {
                self.live -= 1;
            }
        }
        ids
    }

    /// Empties community `id`, detaching all its members.
    pub fn remove_community(&mut self, id: CommunityId) -> Vec<usize> {
        let members = std::mem::take(&mut self.communities[id]);
        if !members.is_empty() {
            self.live -= 1;
        }
        for &v in &members {
            let pos = self.memberships[v].binary_search(&id).unwrap();
            self.memberships[v].remove(pos);
        }
        members
    }

    /// Renumbers live communities densely in slot order.
    pub fn compact(&self) -> Cover {
        Cover::from_communities(
            self.node_count,
            self.communities().map(|(_, m)| m.iter().copied()),
        )
        .expect("members already validated")
    }

    /// Live communities as sorted member lists, the list itself sorted.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.communities().map(|(_, m)| m.to_vec()).collect();
        out.sort();
        out
    }

    /// Applies the node bijection `perm` (old index → new index).
    pub fn relabeled(&self, perm: &[usize]) -> Cover {
        Cover::from_communities(
            self.node_count,
            self.communities().map(|(_, m)| m.iter().map(|&v| perm[v])),
        )
        .expect("permutation stays in range")
    }
}

/// Reads a community file (one community per line, whitespace-separated
/// node labels) against the labels of `graph`.
pub fn read_cover(path: impl AsRef<Path>, graph: &Graph) -> Result<Cover> {
    let path = path.as_ref();
    let lists = read_community_labels(path)?;
    let mut communities = Vec::with_capacity(lists.len());
    for (line, labels) in lists {
        let mut members = Vec::with_capacity(labels.len());
        for label in &labels {
            let v = graph
                .index_of(label)
                .ok_or_else(|| Error::parse(path, line, format!("unknown node `{label}`")))?;
            members.push(v);
        }
        communities.push(members);
    }
    Cover::from_communities(graph.node_count(), communities)
}

/// Raw label lists of a community file, each tagged with its line number.
pub fn read_community_labels(path: impl AsRef<Path>) -> Result<Vec<(usize, Vec<String>)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_owned).collect()))
        .collect())
}

/// Writes one community per line, labels sorted, lines sorted.
pub fn write_cover<W: Write>(out: &mut W, cover: &Cover, graph: &Graph) -> std::io::Result<()> {
    for line in cover_lines(cover, graph) {
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn cover_lines<'g>(cover: &Cover, graph: &'g Graph) -> Vec<Vec<&'g str>> {
    let mut lines: Vec<Vec<&str>> = cover
        .communities()
        .map(|(_, members)| {
            let mut labels: Vec<&str> = members.iter().map(|&v| graph.label(v)).collect();
            labels.sort_by(|a, b| compare_labels(a, b));
            labels
        })
        .collect();
    lines.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b.iter()) {
            let ord = compare_labels(x, y);
            if ord.is_ne() {
                return ord;
            }
        }
        a.len().cmp(&b.len())
    });
    lines
}

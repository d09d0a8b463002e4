use serde::{Deserialize, Serialize};

use super::ClassifyError;

/// A position in the order / family / genus / species hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonLabel {
    pub order: String,
    pub family: String,
    pub genus: String,
    /// Specific epithet; absent for genus-level labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
}

impl TaxonLabel {
    pub fn new(order: &str, family: &str, genus: &str, species: &str) -> Self {
        Self {
            order: order.into(),
            family: family.into(),
            genus: genus.into(),
            species: Some(species.into()),
        }
    }

    /// Class key: the binomial name, or the genus for genus-level labels.
    pub fn key(&self) -> String {
        match &self.species {
            Some(s) => format!("{} {}", self.genus, s),
            None => self.genus.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Order,
    Family,
    Genus,
}

impl Rank {
    fn of(self, label: &TaxonLabel) -> &str {
        match self {
            Rank::Order => &label.order,
            Rank::Family => &label.family,
            Rank::Genus => &label.genus,
        }
    }
}

/// Four-level tree stored as its species leaves in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyTree {
    leaves: Vec<TaxonLabel>,
}

impl TaxonomyTree {
    pub fn new(leaves: Vec<TaxonLabel>) -> Result<Self, ClassifyError> {
        for (i, leaf) in leaves.iter().enumerate() {
            if leaf.species.is_none() {
                return Err(ClassifyError::InvalidTaxonomy(format!(
                    "leaf {} has no species",
                    leaf.key()
                )));
            }
            for other in &leaves[..i] {
                if other.key() == leaf.key() {
                    return Err(ClassifyError::InvalidTaxonomy(format!(
                        "duplicate species {}",
                        leaf.key()
                    )));
                }
                // a genus or family must hang under a single parent
                if other.genus == leaf.genus
                    && (other.family != leaf.family || other.order != leaf.order)
                {
                    return Err(ClassifyError::InvalidTaxonomy(format!(
                        "genus {} has two parents",
                        leaf.genus
                    )));
                }
                if other.family == leaf.family && other.order != leaf.order {
                    return Err(ClassifyError::InvalidTaxonomy(format!(
                        "family {} has two parents",
                        leaf.family
                    )));
                }
            }
        }
        Ok(Self { leaves })
    }

    /// The seven species of the field data set.
    pub fn default_tree() -> Self {
        let leaves = vec![
            TaxonLabel::new("Hymenoptera", "Apidae", "Apis", "mellifera"),
            TaxonLabel::new("Hymenoptera", "Apidae", "Bombus", "terrestris"),
            TaxonLabel::new("Hymenoptera", "Vespidae", "Vespa", "crabro"),
            TaxonLabel::new("Hymenoptera", "Vespidae", "Polistes", "dominula"),
            TaxonLabel::new("Mecoptera", "Panorpidae", "Panorpa", "communis"),
            TaxonLabel::new("Diptera", "Syrphidae", "Eristalis", "tenax"),
            TaxonLabel::new("Diptera", "Syrphidae", "Episyrphus", "balteatus"),
        ];
        Self::new(leaves).expect("default tree is consistent")
    }

    pub fn leaves(&self) -> &[TaxonLabel] {
        &self.leaves
    }

    pub fn species_keys(&self) -> Vec<String> {
        self.leaves.iter().map(TaxonLabel::key).collect()
    }

    pub fn find(&self, key: &str) -> Option<&TaxonLabel> {
        self.leaves.iter().find(|l| l.key() == key)
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.leaves.iter().position(|l| l.key() == key)
    }

    /// True when the label's path exists in the tree.
    pub fn contains(&self, label: &TaxonLabel) -> bool {
        self.leaves.iter().any(|l| {
            l.order == label.order
                && l.family == label.family
                && l.genus == label.genus
                && (label.species.is_none() || l.species == label.species)
        })
    }

    /// Distinct names at `rank`, in order of first appearance.
    pub fn nodes(&self, rank: Rank) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for leaf in &self.leaves {
            let name = rank.of(leaf);
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
        }
        out
    }
}

/// Probability mass aggregated to the inner levels of the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRollup {
    pub genus: Vec<(String, f64)>,
    pub family: Vec<(String, f64)>,
    pub order: Vec<(String, f64)>,
}

impl TaxonomyRollup {
    pub fn probability(&self, rank: Rank, name: &str) -> f64 {
        let level = match rank {
            Rank::Order => &self.order,
            Rank::Family => &self.family,
            Rank::Genus => &self.genus,
        };
        level.iter().find(|(n, _)| n == name).map_or(0.0, |(_, p)| *p)
    }
}

fn rollup_level(tree: &TaxonomyTree, probs: &[f64], rank: Rank) -> Vec<(String, f64)> {
    tree.nodes(rank)
        .into_iter()
        .map(|name| {
            let mass = tree
                .leaves
                .iter()
                .zip(probs)
                .filter(|(leaf, _)| rank.of(leaf) == name)
                .map(|(_, p)| p)
                .sum();
            (name, mass)
        })
        .collect()
}

/// Sums species probabilities (indexed like the tree's leaves) into genus,
/// family and order probabilities.
pub fn rollup_taxonomy(species_probs: &[f64], tree: &TaxonomyTree) -> Result<TaxonomyRollup, ClassifyError> {
    if species_probs.len() != tree.leaves.len() {
        return Err(ClassifyError::LengthMismatch(species_probs.len(), tree.leaves.len()));
    }
    Ok(TaxonomyRollup {
        genus: rollup_level(tree, species_probs, Rank::Genus),
        family: rollup_level(tree, species_probs, Rank::Family),
        order: rollup_level(tree, species_probs, Rank::Order),
    })
}

/// Like [`rollup_taxonomy`] for probabilities over named classes in any order.
pub fn rollup_classes(
    classes: &[String],
    probs: &[f64],
    tree: &TaxonomyTree,
) -> Result<TaxonomyRollup, ClassifyError> {
    if classes.len() != probs.len() {
        return Err(ClassifyError::LengthMismatch(classes.len(), probs.len()));
    }
    let mut leaf_probs = vec![0.0; tree.leaves.len()];
    for (class, p) in classes.iter().zip(probs) {
        let i = tree
            .index_of(class)
            .ok_or_else(|| ClassifyError::UnknownSpecies(class.clone()))?;
        leaf_probs[i] += p;
    }
    rollup_taxonomy(&leaf_probs, tree)
}

use crate::error::{Error, Result};

/// A split of the class list into `folds` contiguous folds, with fold
/// `fold` held out. The first `classes % folds` folds get one extra class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    classes: Vec<String>,
    folds: usize,
    fold: usize,
}

pub const DEFAULT_FOLDS: usize = 4;

impl FoldSpec {
    pub fn new(classes: Vec<String>, folds: usize, fold: usize) -> Result<Self> {
        if folds == 0 || folds > classes.len() {
            return Err(Error::Config(format!(
                "cannot split {} classes into {folds} folds",
                classes.len()
            )));
        }
        if fold >= folds {
            return Err(Error::Config(format!("fold {fold} out of range for {folds} folds")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = classes.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Config(format!("class `{dup}` listed twice")));
        }
        Ok(Self { classes, folds, fold })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn fold(&self) -> usize {
        self.fold
    }

    pub fn with_fold(&self, fold: usize) -> Result<Self> {
        Self::new(self.classes.clone(), self.folds, fold)
    }

    /// Class names of every fold, in order.
    pub fn assignment(&self) -> Vec<&[String]> {
        let (base, extra) = (self.classes.len() / self.folds, self.classes.len() % self.folds);
        let mut out = Vec::with_capacity(self.folds);
        let mut start = 0;
        for f in 0..self.folds {
            let len = base + usize::from(f < extra);
            out.push(&self.classes[start..start + len]);
            start += len;
        }
        out
    }

    /// The held-out (unseen) classes.
    pub fn unseen(&self) -> &[String] {
        self.assignment()[self.fold]
    }

    /// Every class outside the held-out fold, in class-list order.
    pub fn seen(&self) -> Vec<&str> {
        let unseen = self.unseen();
        self.classes
            .iter()
            .filter(|c| !unseen.contains(c))
            .map(String::as_str)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn folds_partition_the_classes() {
        for n in 4..=13 {
            let spec = FoldSpec::new(names(n), 4, 0).unwrap();
            let parts = spec.assignment();
            let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let joined: Vec<String> = parts.concat();
            assert_eq!(joined, names(n));
        }
    }

    #[test]
    fn seen_and_unseen_are_complementary() {
        let spec = FoldSpec::new(names(12), 4, 2).unwrap();
        assert_eq!(spec.unseen(), &["c6", "c7", "c8"]);
        assert_eq!(spec.seen().len(), 9);
        assert!(spec.seen().iter().all(|c| !spec.unseen().iter().any(|u| u == c)));
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(FoldSpec::new(names(3), 4, 0).is_err());
        assert!(FoldSpec::new(names(8), 4, 4).is_err());
        assert!(FoldSpec::new(names(8), 0, 0).is_err());
        assert!(FoldSpec::new(vec!["a".into(), "a".into()], 1, 0).is_err());
    }
}

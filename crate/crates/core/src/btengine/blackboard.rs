use std::collections::{BTreeMap, BTreeSet};

use super::BtError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Access {
    Read,
    Write,
}

/// Declared (key, access) pairs for one behavior.
///
/// Read and write are granted independently; a behavior that both reads and
/// writes a key must declare both.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Permissions {
    grants: BTreeSet<(String, Access)>,
}

impl Permissions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read(mut self, key: &str) -> Self {
        self.grants.insert((key.to_string(), Access::Read));
        self
    }

    pub fn write(mut self, key: &str) -> Self {
        self.grants.insert((key.to_string(), Access::Write));
        self
    }

    pub fn read_write(self, key: &str) -> Self {
        self.read(key).write(key)
    }

    pub fn allows(&self, key: &str, access: Access) -> bool {
        self.grants.contains(&(key.to_string(), access))
    }

    pub fn has_writes(&self) -> bool {
        self.grants.iter().any(|(_, a)| *a == Access::Write)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Access)> {
        self.grants.iter().map(|(k, a)| (k.as_str(), *a))
    }
}

/// Keyed store shared between a tree and its environment.
///
/// Keys are namespaced strings such as `"cyber/meta_action"`. `V` is the
/// domain's closed set of value variants. The environment side uses the
/// unrestricted [`get`](Self::get)/[`set`](Self::set); behaviors only ever see
/// a [`BlackboardAccess`] scoped to their declared permissions.
#[derive(Debug, Clone, PartialEq)]
pub struct Blackboard<V> {
    values: BTreeMap<String, V>,
    writes: BTreeMap<String, u64>,
}

impl<V> Default for Blackboard<V> {
    fn default() -> Self {
        Self {
            values: BTreeMap::new(),
            writes: BTreeMap::new(),
        }
    }
}

impl<V> Blackboard<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&V> {
        self.values.get(key)
    }

    pub fn set(&mut self, key: &str, value: V) {
        *self.writes.entry(key.to_string()).or_default() += 1;
        self.values.insert(key.to_string(), value);
    }

    pub fn remove(&mut self, key: &str) -> Option<V> {
        self.values.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Number of `set` calls that have targeted `key` since creation.
    pub fn write_count(&self, key: &str) -> u64 {
        self.writes.get(key).copied().unwrap_or(0)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn access<'a>(
        &'a mut self,
        behavior: &'a str,
        permissions: &'a Permissions,
    ) -> BlackboardAccess<'a, V> {
        BlackboardAccess {
            board: self,
            behavior,
            permissions,
        }
    }
}

/// A behavior's permission-checked view of the blackboard.
pub struct BlackboardAccess<'a, V> {
    board: &'a mut Blackboard<V>,
    behavior: &'a str,
    permissions: &'a Permissions,
}

impl<V> BlackboardAccess<'_, V> {
    fn check(&self, key: &str, access: Access) -> Result<(), BtError> {
        if self.permissions.allows(key, access) {
            Ok(())
        } else {
            Err(BtError::PermissionViolation {
                key: key.to_string(),
                behavior: self.behavior.to_string(),
            })
        }
    }

    pub fn behavior(&self) -> &str {
        self.behavior
    }

    pub fn get(&self, key: &str) -> Result<Option<&V>, BtError> {
        self.check(key, Access::Read)?;
        Ok(self.board.get(key))
    }

    pub fn set(&mut self, key: &str, value: V) -> Result<(), BtError> {
        self.check(key, Access::Write)?;
        self.board.set(key, value);
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Result<Option<V>, BtError> {
        self.check(key, Access::Write)?;
        Ok(self.board.remove(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_access_passes_undeclared_fails() {
        let mut bb: Blackboard<i64> = Blackboard::new();
        bb.set("ns/a", 1);
        let perms = Permissions::new().read("ns/a").write("ns/b");
        let mut view = bb.access("B!", &perms);
        assert_eq!(view.get("ns/a").unwrap(), Some(&1));
        view.set("ns/b", 2).unwrap();
        assert_eq!(
            view.set("ns/a", 3),
            Err(BtError::PermissionViolation {
                key: "ns/a".into(),
                behavior: "B!".into()
            })
        );
        assert!(view.get("ns/b").is_err());
        assert_eq!(bb.get("ns/a"), Some(&1));
        assert_eq!(bb.get("ns/b"), Some(&2));
    }

    #[test]
    fn write_counts_accumulate() {
        let mut bb: Blackboard<i64> = Blackboard::new();
        assert_eq!(bb.write_count("ns/x"), 0);
        bb.set("ns/x", 1);
        bb.set("ns/x", 2);
        assert_eq!(bb.write_count("ns/x"), 2);
        assert_eq!(bb.remove("ns/x"), Some(2));
        assert!(!bb.contains("ns/x"));
    }
}

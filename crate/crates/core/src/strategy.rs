//! Name-keyed sets of interchangeable implementations behind a common trait.
//!
//! Signature schemes and credential revocation policies are registered here
//! and selected at runtime by the name a document, config file or CLI flag
//! carries.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub trait Named {
    fn name(&self) -> &'static str;
}

pub struct Strategies<T: ?Sized + Named> {
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Named> Strategies<T> {
    pub fn new() -> Self {
        Strategies {
            entries: BTreeMap::new(),
        }
    }

    /// Registers `strategy` under its own name, replacing any previous entry.
    pub fn register(&mut self, strategy: Arc<T>) -> &mut Self {
        self.entries.insert(strategy.name(), strategy);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Arc<T>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: ?Sized + Named> Default for Strategies<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: ?Sized + Named> Clone for Strategies<T> {
    fn clone(&self) -> Self {
        Strategies {
            entries: self.entries.clone(),
        }
    }
}

impl<T: ?Sized + Named> fmt::Debug for Strategies<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} {name:?}; available: {available}")]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: String,
}

impl<T: ?Sized + Named> Strategies<T> {
    /// Like [`Strategies::get`] but with an error listing the registered names.
    pub fn select(&self, kind: &'static str, name: &str) -> Result<Arc<T>, UnknownStrategy> {
        self.get(name).cloned().ok_or_else(|| UnknownStrategy {
            kind,
            name: name.to_owned(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter: Named {
        fn greet(&self) -> String;
    }

    struct Hello;
    impl Named for Hello {
        fn name(&self) -> &'static str {
            "hello"
        }
    }
    impl Greeter for Hello {
        fn greet(&self) -> String {
            "hello".into()
        }
    }

    #[test]
    fn register_and_select() {
        let mut s: Strategies<dyn Greeter> = Strategies::new();
        s.register(Arc::new(Hello));
        assert_eq!(s.select("greeter", "hello").unwrap().greet(), "hello");
        let err = s.select("greeter", "bye").err().unwrap();
        assert_eq!(err.available, "hello");
    }
}

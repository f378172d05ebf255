//! Global string interner. Symbols compare by id; the text lives for the
//! whole process.

use std::fmt;
use std::sync::{OnceLock, RwLock};

use rustc_hash::FxHashMap;

#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(u32);

struct Interner {
    ids: FxHashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

// Order must match the associated constants below.
const RESERVED: &[&str] = &["[]", ".", "$x", "$fd", "true", "false"];

impl Symbol {
    pub const NIL: Symbol = Symbol(0);
    pub const CONS: Symbol = Symbol(1);
    /// Functor of a perceived item reference, `'$x'(Index)`.
    pub const ITEM: Symbol = Symbol(2);
    /// Functor of a finite-domain variable reference, `'$fd'(Id)`.
    pub const FD: Symbol = Symbol(3);
    pub const TRUE: Symbol = Symbol(4);
    pub const FALSE: Symbol = Symbol(5);

    pub fn intern(name: &str) -> Symbol {
        let table = interner();
        if let Some(&id) = table.read().unwrap().ids.get(name) {
            return Symbol(id);
        }
        let mut guard = table.write().unwrap();
        if let Some(&id) = guard.ids.get(name) {
            return Symbol(id);
        }
        let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
        let id = guard.names.len() as u32;
        guard.names.push(leaked);
        guard.ids.insert(leaked, id);
        Symbol(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().read().unwrap().names[self.0 as usize]
    }

    pub fn id(self) -> u32 {
        self.0
    }
}

fn interner() -> &'static RwLock<Interner> {
    static TABLE: OnceLock<RwLock<Interner>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut ids = FxHashMap::default();
        let mut names = Vec::new();
        for (i, name) in RESERVED.iter().enumerate() {
            ids.insert(*name, i as u32);
            names.push(*name);
        }
        RwLock::new(Interner { ids, names })
    })
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::intern(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_symbols_are_stable() {
        assert_eq!(Symbol::intern("[]"), Symbol::NIL);
        assert_eq!(Symbol::intern("."), Symbol::CONS);
        assert_eq!(Symbol::intern("$fd"), Symbol::FD);
        assert_eq!(Symbol::FALSE.as_str(), "false");
    }

    #[test]
    fn interning_is_idempotent() {
        let a = Symbol::intern("head");
        let b = Symbol::intern("head");
        assert_eq!(a, b);
        assert_ne!(a, Symbol::intern("tail"));
        assert_eq!(a.as_str(), "head");
    }
}

//! Who sits where: holds and soft reservations on city objects.

use std::collections::BTreeSet;

use crate::citygen::SemanticCity;

#[derive(Debug, Clone, Default)]
pub struct Occupancy {
    capacity: Vec<u32>,
    holders: Vec<BTreeSet<u32>>,
    reserved: Vec<BTreeSet<u32>>,
}

impl Occupancy {
    pub fn new(city: &SemanticCity) -> Self {
        let n = city.objects.len();
        Occupancy {
            capacity: city.objects.iter().map(|o| o.capacity).collect(),
            holders: vec![BTreeSet::new(); n],
            reserved: vec![BTreeSet::new(); n],
        }
    }

    pub fn clear(&mut self) {
        self.holders.iter_mut().for_each(BTreeSet::clear);
        self.reserved.iter_mut().for_each(BTreeSet::clear);
    }

    fn used(&self, o: usize) -> usize {
        self.holders[o].len() + self.reserved[o].len()
    }

    /// Whether a new reservation fits.
    pub fn is_free(&self, object: u32) -> bool {
        let o = object as usize;
        self.used(o) < self.capacity[o] as usize
    }

    pub fn reserve(&mut self, object: u32, person: u32) -> bool {
        let o = object as usize;
        if self.reserved[o].contains(&person) || self.holders[o].contains(&person) {
            return true;
        }
        if !self.is_free(object) {
            return false;
        }
        self.reserved[o].insert(person);
        true
    }

    /// Turns the person's reservation into a hold, or takes a free place.
    pub fn hold(&mut self, object: u32, person: u32) -> bool {
        let o = object as usize;
        if self.holders[o].contains(&person) {
            return true;
        }
        if self.reserved[o].remove(&person) || self.is_free(object) {
            self.holders[o].insert(person);
            return true;
        }
        false
    }

    /// Drops every hold and reservation of a person.
    pub fn release(&mut self, person: u32) {
        for o in 0..self.holders.len() {
            self.holders[o].remove(&person);
            self.reserved[o].remove(&person);
        }
    }

    pub fn holders(&self, object: u32) -> &BTreeSet<u32> {
        &self.holders[object as usize]
    }

    pub fn reservations(&self, object: u32) -> &BTreeSet<u32> {
        &self.reserved[object as usize]
    }

    /// Invariant check: nothing over capacity.
    pub fn within_capacity(&self) -> bool {
        (0..self.capacity.len()).all(|o| self.used(o) <= self.capacity[o] as usize)
    }

    pub fn is_empty(&self) -> bool {
        (0..self.capacity.len()).all(|o| self.used(o) == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cap: u32) -> Occupancy {
        Occupancy { capacity: vec![cap], holders: vec![BTreeSet::new()], reserved: vec![BTreeSet::new()] }
    }

    #[test]
    fn reservation_becomes_hold() {
        let mut t = table(1);
        assert!(t.reserve(0, 7));
        assert!(!t.reserve(0, 8));
        assert!(!t.hold(0, 8));
        assert!(t.hold(0, 7));
        assert_eq!(t.holders(0).len(), 1);
        assert!(t.reservations(0).is_empty());
        t.release(7);
        assert!(t.is_empty());
        assert!(t.hold(0, 8));
        assert!(t.within_capacity());
    }
}

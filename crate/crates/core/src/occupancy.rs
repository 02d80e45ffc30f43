/// Visit counter over integer cells (lattice sites or spatial bins).
///
/// Stored as a dense window `[origin, origin + len)` that doubles toward
/// whichever side a new cell falls outside. A walk of `k` steps touches a
/// contiguous range, so the window never holds more than that range plus
/// slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    origin: i64,
    counts: Vec<u32>,
    total: u64,
}

impl Default for Occupancy {
    fn default() -> Self {
        Self::with_half_width(32)
    }
}

impl Occupancy {
    pub fn with_half_width(half: usize) -> Self {
        let half = half.max(1) as i64;
        Self {
            origin: -half,
            counts: vec![0; (2 * half + 1) as usize],
            total: 0,
        }
    }

    /// Zeroes every count, keeping the allocation.
    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.total = 0;
    }

    /// Records one visit to `cell` and returns its updated count.
    #[inline(always)]
    pub fn visit(&mut self, cell: i64) -> u32 {
        let mut idx = cell.wrapping_sub(self.origin);
        if idx < 0 || idx >= self.counts.len() as i64 {
            self.grow_to(cell);
            idx = cell - self.origin;
        }
        self.total += 1;
        let c = &mut self.counts[idx as usize];
        *c += 1;
        *c
    }

    /// Removes one visit from `cell`. Used for backtracking enumerations.
    pub fn unvisit(&mut self, cell: i64) {
        let idx = cell - self.origin;
        assert!(idx >= 0 && (idx as usize) < self.counts.len() && self.counts[idx as usize] > 0);
        self.counts[idx as usize] -= 1;
        self.total -= 1;
    }

    pub fn get(&self, cell: i64) -> u32 {
        let idx = cell - self.origin;
        if idx < 0 || idx >= self.counts.len() as i64 {
            0
        } else {
            self.counts[idx as usize]
        }
    }

    /// Number of visits recorded so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Sum of the stored counts, recomputed from the cells.
    pub fn recount(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Non-zero cells in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (self.origin + i as i64, c))
    }

    #[cold]
    fn grow_to(&mut self, cell: i64) {
        let len = self.counts.len() as i64;
        let end = self.origin + len;
        if cell < self.origin {
            let extra = (self.origin - cell).max(len);
            let mut grown = vec![0; extra as usize];
            grown.extend_from_slice(&self.counts);
            self.counts = grown;
            self.origin -= extra;
        } else if cell >= end {
            let extra = (cell - end + 1).max(len);
            self.counts.resize((len + extra) as usize, 0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visit_and_grow_both_sides() {
        let mut occ = Occupancy::with_half_width(1);
        assert_eq!(occ.visit(0), 1);
        assert_eq!(occ.visit(0), 2);
        assert_eq!(occ.visit(-50), 1);
        assert_eq!(occ.visit(1000), 1);
        assert_eq!(occ.get(0), 2);
        assert_eq!(occ.get(-50), 1);
        assert_eq!(occ.get(7), 0);
        assert_eq!(occ.total(), 4);
        assert_eq!(occ.recount(), 4);
        let cells: Vec<_> = occ.iter().collect();
        assert_eq!(cells, vec![(-50, 1), (0, 2), (1000, 1)]);
    }

    #[test]
    fn clear_and_unvisit() {
        let mut occ = Occupancy::default();
        occ.visit(3);
        occ.visit(3);
        occ.unvisit(3);
        assert_eq!(occ.get(3), 1);
        occ.clear();
        assert_eq!(occ.get(3), 0);
        assert_eq!(occ.total(), 0);
    }
}

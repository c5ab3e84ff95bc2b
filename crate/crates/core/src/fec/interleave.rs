//! Row-column block interleaver.
//!
//! Symbols are written row by row into a `rows × ceil(len/rows)` array and
//! read out column by column. A short final row is allowed; its missing cells
//! are skipped on readout, so the permutation is defined for every length.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockInterleaver {
    rows: usize,
}

impl BlockInterleaver {
    /// `rows` of zero or one gives the identity permutation.
    pub fn new(rows: usize) -> Self {
        Self { rows: rows.max(1) }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Source index of each output position.
    fn order(&self, len: usize) -> impl Iterator<Item = usize> {
        let rows = self.rows;
        let cols = len.div_ceil(rows);
        (0..cols).flat_map(move |c| (0..rows).map(move |r| r * cols + c)).filter(move |&i| i < len)
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        self.order(input.len()).map(|i| input[i]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); input.len()];
        for (src, dst) in self.order(input.len()).enumerate() {
            out[dst] = input[src];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_by_three() {
        let il = BlockInterleaver::new(3);
        let data: Vec<u32> = (0..12).collect();
        assert_eq!(il.interleave(&data), vec![0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11]);
    }

    #[test]
    fn ragged_last_row() {
        let il = BlockInterleaver::new(3);
        let data: Vec<u32> = (0..7).collect();
        // cols = 3, rows hold [0 1 2] [3 4 5] [6]
        assert_eq!(il.interleave(&data), vec![0, 3, 6, 1, 4, 2, 5]);
    }

    #[test]
    fn burst_is_spread_across_rows() {
        let il = BlockInterleaver::new(8);
        let len = 8 * 2040;
        let positions: Vec<usize> = (0..len).collect();
        let out = il.interleave(&positions);
        // 40 adjacent output symbols come from 8 different rows, 5 each.
        let mut per_row = [0usize; 8];
        for &src in &out[1000..1040] {
            per_row[src / 2040] += 1;
        }
        assert_eq!(per_row, [5; 8]);
    }

    proptest! {
        #[test]
        fn deinterleave_inverts(rows in 0usize..40, data in proptest::collection::vec(any::<u8>(), 0..600)) {
            let il = BlockInterleaver::new(rows);
            prop_assert_eq!(il.deinterleave(&il.interleave(&data)), data.clone());
            prop_assert_eq!(il.interleave(&il.deinterleave(&data)), data);
        }
    }
}

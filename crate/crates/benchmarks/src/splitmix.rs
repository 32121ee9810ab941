pub use cube_core::SplitMix64;

/// The vault secret for `seed`: lowercase hex of the first output, 16 chars.
pub fn vault_secret(seed: u64) -> String {
    format!("{:016x}", SplitMix64::new(seed).next_u64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secrets() {
        assert_eq!(vault_secret(0), "e220a8397b1dcdaf");
        assert_eq!(vault_secret(7), "63cbe1e459320dd7");
        assert_eq!(vault_secret(42), "bdd732262feb6e95");
        assert_eq!(vault_secret(1), "910a2dec89025cc1");
    }
}

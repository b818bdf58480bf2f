#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fslink/indexing.hpp"

namespace fslink {

/// Counts over pattern space with a support mask; cells off support are
/// structural zeros. These are the sufficient statistics for estimation.
struct ContingencyTable {
    int q = 0;
    std::vector<std::uint64_t> counts;  // dense, indexed by PatternId
    SupportSet support;
    std::uint64_t n = 0;

    std::uint64_t count(PatternId g) const { return counts[g]; }
    // throws when a structural zero holds a count or n is inconsistent
    void validate() const;
};

/// Counts retained (iota = 1) pairs; support comes from the pair set.
ContingencyTable tabulate(const CandidatePairSet& pairs, int threads = 1);

/// Cell-wise sum; q and support must match.
ContingencyTable merge(const ContingencyTable& t1, const ContingencyTable& t2);

void write_table_csv(const std::string& path, const ContingencyTable& table);
ContingencyTable read_table_csv(const std::string& path);

}  // namespace fslink

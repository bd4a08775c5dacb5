#pragma once

// Exponent data of a lattice monomial  prod_j q_j^{n_j} conj(q_j)^{n'_j}.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace dnls {

struct SiteExponent {
  int site = 0;
  int q = 0;     // power of q_j
  int qbar = 0;  // power of conj(q_j)

  auto operator<=>(SiteExponent const&) const = default;
};

/// Canonical multi-index: sites strictly increasing, no (0,0) entries.
class MultiIndex {
 public:
  MultiIndex() = default;

  /// Merges duplicate sites, drops zero entries and sorts.  Throws
  /// std::invalid_argument on a negative exponent.
  static MultiIndex canonicalize(std::vector<SiteExponent> raw) {
    for (auto const& e : raw) {
      if (e.q < 0 || e.qbar < 0) throw std::invalid_argument("MultiIndex: negative exponent");
    }
    std::sort(raw.begin(), raw.end(),
              [](SiteExponent const& a, SiteExponent const& b) { return a.site < b.site; });
    MultiIndex out;
    for (auto const& e : raw) {
      if (!out.entries_.empty() && out.entries_.back().site == e.site) {
        out.entries_.back().q += e.q;
        out.entries_.back().qbar += e.qbar;
      } else {
        out.entries_.push_back(e);
      }
    }
    std::erase_if(out.entries_, [](SiteExponent const& e) { return e.q == 0 && e.qbar == 0; });
    return out;
  }

  static MultiIndex canonicalize(std::initializer_list<SiteExponent> raw) {
    return canonicalize(std::vector<SiteExponent>(raw));
  }

  /// |q_j|^2
  static MultiIndex square_modulus(int site) { return from_sorted({{site, 1, 1}}); }

  /// Caller guarantees canonical order; checked only in debug builds.
  static MultiIndex from_sorted(std::vector<SiteExponent> entries) {
    MultiIndex out;
    out.entries_ = std::move(entries);
    return out;
  }

  std::vector<SiteExponent> const& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }

  std::vector<int> support() const {
    std::vector<int> s;
    s.reserve(entries_.size());
    for (auto const& e : entries_) s.push_back(e.site);
    return s;
  }

  int min_site() const { return entries_.front().site; }
  int max_site() const { return entries_.back().site; }

  int diameter() const { return entries_.empty() ? 0 : max_site() - min_site(); }

  int degree() const {
    int d = 0;
    for (auto const& e : entries_) d += e.q + e.qbar;
    return d;
  }

  bool is_resonant() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](SiteExponent const& e) { return e.q == e.qbar; });
  }

  bool is_gauge_balanced() const {
    int balance = 0;
    for (auto const& e : entries_) balance += e.q - e.qbar;
    return balance == 0;
  }

  /// Swap q <-> conj(q) at every site.
  MultiIndex conjugate() const {
    MultiIndex out = *this;
    for (auto& e : out.entries_) std::swap(e.q, e.qbar);
    return out;
  }

  /// Exponent pair at `site`, {0,0} if absent.
  SiteExponent at(int site) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), site,
                               [](SiteExponent const& e, int s) { return e.site < s; });
    if (it != entries_.end() && it->site == site) return *it;
    return {site, 0, 0};
  }

  bool touches(int lo, int hi) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), lo,
                               [](SiteExponent const& e, int s) { return e.site < s; });
    return it != entries_.end() && it->site <= hi;
  }

  bool inside(int lo, int hi) const {
    return !entries_.empty() && min_site() >= lo && max_site() <= hi;
  }

  auto operator<=>(MultiIndex const&) const = default;
  bool operator==(MultiIndex const&) const = default;

 private:
  std::vector<SiteExponent> entries_;
};

struct MultiIndexHash {
  std::size_t operator()(MultiIndex const& n) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t x) {
      h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    for (auto const& e : n.entries()) {
      mix(static_cast<std::uint32_t>(e.site));
      mix((static_cast<std::uint64_t>(e.q) << 32) | static_cast<std::uint32_t>(e.qbar));
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace dnls

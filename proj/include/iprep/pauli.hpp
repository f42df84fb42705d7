#pragma once

// Sparse Pauli-string algebra on up to 32 qubits.
//
// Site ordering: site 1 is the most significant bit of a computational basis
// index. A set bit means spin down (sigma^z = -1).

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace iprep {

using cplx = std::complex<double>;

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline constexpr std::size_t kMaxSites = 32;

inline char pauli_char(Pauli p) {
  constexpr char table[] = {'I', 'X', 'Y', 'Z'};
  return table[static_cast<int>(p)];
}

class PauliString {
 public:
  PauliString() = default;

  explicit PauliString(std::size_t n_sites) : n_(n_sites) {
    if (n_sites == 0 || n_sites > kMaxSites)
      throw std::invalid_argument("PauliString: site count must be in [1, 32]");
  }

  PauliString(std::size_t n_sites, std::uint64_t x_mask, std::uint64_t z_mask)
      : PauliString(n_sites) {
    const std::uint64_t full = full_mask();
    x_ = x_mask & full;
    z_ = z_mask & full;
    key_ = compute_key();
  }

  static PauliString identity(std::size_t n_sites) { return PauliString(n_sites); }

  /// Letters read left to right as sites 1..n, e.g. "XZIY".
  static PauliString parse(std::string_view letters) {
    PauliString s(letters.size());
    for (std::size_t i = 0; i < letters.size(); ++i) {
      switch (letters[i]) {
        case 'I': break;
        case 'X': s.set(i + 1, Pauli::X); break;
        case 'Y': s.set(i + 1, Pauli::Y); break;
        case 'Z': s.set(i + 1, Pauli::Z); break;
        default:
          throw std::invalid_argument(std::string("PauliString: bad letter '") +
                                      letters[i] + "'");
      }
    }
    return s;
  }

  /// Single-site operator on site `site` (1-based).
  static PauliString single(std::size_t n_sites, std::size_t site, Pauli p) {
    PauliString s(n_sites);
    s.set(site, p);
    return s;
  }

  std::size_t n_sites() const { return n_; }
  std::uint64_t x_mask() const { return x_; }
  std::uint64_t z_mask() const { return z_; }

  std::uint64_t site_bit(std::size_t site) const {
    if (site < 1 || site > n_) throw std::out_of_range("PauliString: site out of range");
    return std::uint64_t{1} << (n_ - site);
  }

  Pauli at(std::size_t site) const {
    const std::uint64_t b = site_bit(site);
    const bool x = x_ & b, z = z_ & b;
    if (x && z) return Pauli::Y;
    if (x) return Pauli::X;
    if (z) return Pauli::Z;
    return Pauli::I;
  }

  void set(std::size_t site, Pauli p) {
    const std::uint64_t b = site_bit(site);
    x_ &= ~b;
    z_ &= ~b;
    if (p == Pauli::X || p == Pauli::Y) x_ |= b;
    if (p == Pauli::Z || p == Pauli::Y) z_ |= b;
    key_ = compute_key();
  }

  bool is_identity() const { return (x_ | z_) == 0; }
  int weight() const { return std::popcount(x_ | z_); }
  int y_count() const { return std::popcount(x_ & z_); }

  bool commutes_with(const PauliString& o) const {
    return ((std::popcount(x_ & o.z_) + std::popcount(z_ & o.x_)) & 1) == 0;
  }

  std::string str() const {
    std::string out(n_, 'I');
    for (std::size_t s = 1; s <= n_; ++s) out[s - 1] = pauli_char(at(s));
    return out;
  }

  /// 2 bits per site, site 1 most significant; numeric order == lexicographic
  /// order of str() over the alphabet I < X < Y < Z.
  std::uint64_t lex_key() const { return key_; }

  friend bool operator==(const PauliString& a, const PauliString& b) {
    return a.n_ == b.n_ && a.x_ == b.x_ && a.z_ == b.z_;
  }
  friend bool operator<(const PauliString& a, const PauliString& b) {
    if (a.n_ != b.n_) return a.n_ < b.n_;
    return a.lex_key() < b.lex_key();
  }

  /// Action on a computational basis state: P|b> = phase * |b ^ x>.
  std::pair<std::uint64_t, cplx> act(std::uint64_t basis) const {
    static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    int e = y_count() + 2 * std::popcount(z_ & basis);
    return {basis ^ x_, ipow[e & 3]};
  }

  /// Product a*b = i^phase * c, with phase in {0,1,2,3}.
  friend std::pair<PauliString, int> multiply(const PauliString& a, const PauliString& b) {
    if (a.n_ != b.n_) throw std::invalid_argument("PauliString: site count mismatch");
    PauliString c(a.n_, a.x_ ^ b.x_, a.z_ ^ b.z_);
    int e = a.y_count() + b.y_count() - c.y_count() + 2 * std::popcount(a.z_ & b.x_);
    return {c, ((e % 4) + 4) % 4};
  }

 private:
  std::uint64_t full_mask() const {
    return n_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n_) - 1);
  }

  std::uint64_t compute_key() const {
    std::uint64_t key = 0;
    for (std::size_t s = 1; s <= n_; ++s) key = (key << 2) | static_cast<std::uint64_t>(at(s));
    return key;
  }

  std::size_t n_ = 1;
  std::uint64_t x_ = 0;
  std::uint64_t z_ = 0;
  std::uint64_t key_ = 0;
};

struct PauliLess {
  bool operator()(const PauliString& a, const PauliString& b) const { return a < b; }
};

class ComplexPauliSum;

/// Hermitian operator as a real-weighted sum of Pauli strings. Identity-string
/// terms hold the constant part.
class PauliOperator {
 public:
  using TermMap = std::map<PauliString, double, PauliLess>;

  PauliOperator() = default;
  explicit PauliOperator(std::size_t n_sites) : n_(n_sites) {
    if (n_sites == 0 || n_sites > kMaxSites)
      throw std::invalid_argument("PauliOperator: site count must be in [1, 32]");
  }
  PauliOperator(const PauliString& s, double coeff) : PauliOperator(s.n_sites()) {
    add(s, coeff);
  }

  static PauliOperator identity(std::size_t n_sites, double coeff = 1.0) {
    return PauliOperator(PauliString::identity(n_sites), coeff);
  }
  static PauliOperator single(std::size_t n_sites, std::size_t site, Pauli p,
                              double coeff = 1.0) {
    return PauliOperator(PauliString::single(n_sites, site, p), coeff);
  }

  std::size_t n_sites() const { return n_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const TermMap& terms() const { return terms_; }

  double coefficient(const PauliString& s) const {
    auto it = terms_.find(s);
    return it == terms_.end() ? 0.0 : it->second;
  }

  PauliOperator& add(const PauliString& s, double coeff) {
    check_sites(s.n_sites());
    if (coeff != 0.0) terms_[s] += coeff;
    return *this;
  }
  PauliOperator& add(std::string_view letters, double coeff) {
    return add(PauliString::parse(letters), coeff);
  }

  /// Drop terms with |b| <= tol * max(1, max|b|).
  PauliOperator& prune(double tol = 1e-14) {
    double scale = 1.0;
    for (const auto& [s, c] : terms_) scale = std::max(scale, std::abs(c));
    std::erase_if(terms_, [&](const auto& kv) { return std::abs(kv.second) <= tol * scale; });
    return *this;
  }

  double max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [s, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  PauliOperator& operator+=(const PauliOperator& o) {
    check_sites(o.n_);
    for (const auto& [s, c] : o.terms_) terms_[s] += c;
    return prune();
  }
  PauliOperator& operator-=(const PauliOperator& o) {
    check_sites(o.n_);
    for (const auto& [s, c] : o.terms_) terms_[s] -= c;
    return prune();
  }
  PauliOperator& operator*=(double a) {
    for (auto& [s, c] : terms_) c *= a;
    return prune();
  }

  friend PauliOperator operator+(PauliOperator a, const PauliOperator& b) { return a += b; }
  friend PauliOperator operator-(PauliOperator a, const PauliOperator& b) { return a -= b; }
  friend PauliOperator operator*(PauliOperator a, double s) { return a *= s; }
  friend PauliOperator operator*(double s, PauliOperator a) { return a *= s; }

  /// One "coefficient  PAULISTRING" line per term, lexicographic string order.
  std::string to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& [s, c] : terms_) os << c << "  " << s.str() << '\n';
    return os.str();
  }

  static PauliOperator from_text(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    std::vector<std::pair<PauliString, double>> parsed;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      double c;
      std::string letters;
      if (!(ls >> c)) continue;
      if (!(ls >> letters)) throw std::invalid_argument("PauliOperator: missing string");
      parsed.emplace_back(PauliString::parse(letters), c);
    }
    if (parsed.empty()) throw std::invalid_argument("PauliOperator: empty dump");
    PauliOperator op(parsed.front().first.n_sites());
    for (const auto& [s, c] : parsed) op.add(s, c);
    return op;
  }

 private:
  void check_sites(std::size_t n) {
    if (n_ == 0) n_ = n;
    if (n != n_) throw std::invalid_argument("PauliOperator: site count mismatch");
  }

  std::size_t n_ = 0;
  TermMap terms_;
};

/// Complex-weighted Pauli sum, the intermediate of operator products.
class ComplexPauliSum {
 public:
  using TermMap = std::map<PauliString, cplx, PauliLess>;

  explicit ComplexPauliSum(std::size_t n_sites) : n_(n_sites) {}

  std::size_t n_sites() const { return n_; }
  const TermMap& terms() const { return terms_; }

  void add(const PauliString& s, cplx c) { terms_[s] += c; }

  double max_abs() const {
    double m = 0.0;
    for (const auto& [s, c] : terms_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Real part as a PauliOperator. Throws if any imaginary part survives
  /// beyond imag_tol * max(1, max|c|).
  PauliOperator hermitian(double imag_tol = 1e-12, double prune_tol = 1e-14) const {
    double scale = std::max(1.0, max_abs());
    PauliOperator out(n_);
    for (const auto& [s, c] : terms_) {
      if (std::abs(c.imag()) > imag_tol * scale)
        throw std::logic_error("ComplexPauliSum: non-Hermitian residue on " + s.str());
      out.add(s, c.real());
    }
    return out.prune(prune_tol);
  }

  /// Imaginary part as a PauliOperator (commutators are i * Hermitian).
  PauliOperator imag_part(double prune_tol = 1e-14) const {
    PauliOperator out(n_);
    for (const auto& [s, c] : terms_) out.add(s, c.imag());
    return out.prune(prune_tol);
  }

 private:
  std::size_t n_;
  TermMap terms_;
};

inline ComplexPauliSum product(const PauliOperator& a, const PauliOperator& b) {
  if (a.n_sites() != b.n_sites()) throw std::invalid_argument("product: site count mismatch");
  static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  ComplexPauliSum out(a.n_sites());
  for (const auto& [sa, ca] : a.terms())
    for (const auto& [sb, cb] : b.terms()) {
      auto [sc, ph] = multiply(sa, sb);
      out.add(sc, ipow[ph] * (ca * cb));
    }
  return out;
}

/// A^2 recollected in the Pauli basis. Anticommuting cross terms cancel exactly
/// and commuting ones carry real phases, so only a real part survives.
inline PauliOperator square(const PauliOperator& a) { return product(a, a).hermitian(); }

/// (AB + BA)/2, Hermitian for Hermitian A, B.
inline PauliOperator anticommutator_half(const PauliOperator& a, const PauliOperator& b) {
  static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  ComplexPauliSum out(a.n_sites());
  for (const auto& [sa, ca] : a.terms())
    for (const auto& [sb, cb] : b.terms()) {
      if (!sa.commutes_with(sb)) continue;
      auto [sc, ph] = multiply(sa, sb);
      out.add(sc, ipow[ph] * (ca * cb));
    }
  return out.hermitian();
}

/// [A, B] = i C with C Hermitian; returns C.
inline PauliOperator commutator_over_i(const PauliOperator& a, const PauliOperator& b) {
  static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  ComplexPauliSum out(a.n_sites());
  for (const auto& [sa, ca] : a.terms())
    for (const auto& [sb, cb] : b.terms()) {
      if (sa.commutes_with(sb)) continue;
      auto [sc, ph] = multiply(sa, sb);
      out.add(sc, 2.0 * ipow[ph] * (ca * cb) / cplx{0, 1});
    }
  return out.hermitian();
}

struct SupportCount {
  std::size_t strings = 0;
  double max_b = 0.0;
};

inline SupportCount support_count(const PauliOperator& op) {
  return {op.size(), op.max_abs_coefficient()};
}

}  // namespace iprep

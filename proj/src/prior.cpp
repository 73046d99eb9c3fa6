#include "gcm/prior.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gcm/errors.hpp"

namespace gcm {

bool OrPrior::operator==(const OrPrior& other) const { return children == other.children; }
bool AndPrior::operator==(const AndPrior& other) const { return children == other.children; }

PriorSpec PriorSpec::temporal(int lag) {
  if (lag <= 0) throw ConfigError("temporal prior: lag must be positive");
  return {TemporalPrior{lag}};
}

PriorSpec PriorSpec::spatial(double radius) {
  if (!(radius >= 0.0)) throw ConfigError("spatial prior: radius must be non-negative");
  return {SpatialPrior{radius}};
}

PriorSpec PriorSpec::latent(LatentMetric metric, double threshold) {
  if (!std::isfinite(threshold)) throw ConfigError("latent prior: threshold must be finite");
  return {LatentSimPrior{metric, threshold}};
}

PriorSpec PriorSpec::identity(std::string a, std::string b) {
  if (a.empty() || b.empty()) throw ConfigError("identity prior: field selectors must be named");
  return {IdentityPrior{std::move(a), std::move(b)}};
}

PriorSpec PriorSpec::any_of(std::vector<PriorSpec> children) {
  if (children.empty()) throw ConfigError("or prior: needs at least one child");
  return {OrPrior{std::move(children)}};
}

PriorSpec PriorSpec::all_of(std::vector<PriorSpec> children) {
  if (children.empty()) throw ConfigError("and prior: needs at least one child");
  return {AndPrior{std::move(children)}};
}

namespace {

const std::vector<float>& require_vector(const std::optional<std::vector<float>>& v,
                                         const char* what) {
  if (!v) throw ConfigError(std::string("prior needs observation metadata '") + what + "'");
  return *v;
}

double l2_distance(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw DimensionError("prior: metadata vectors differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    total += d * d;
  }
  return std::sqrt(total);
}

double cosine_distance(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw DimensionError("prior: metadata vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Evaluator {
  std::size_t j;
  std::size_t t;
  const ObservationMeta& mj;
  const ObservationMeta& mt;

  bool operator()(const EmptyPrior&) const { return false; }
  bool operator()(const TemporalPrior& p) const {
    return t - j == static_cast<std::size_t>(p.lag);
  }
  bool operator()(const SpatialPrior& p) const {
    return l2_distance(require_vector(mj.position, "position"),
                       require_vector(mt.position, "position")) <= p.radius;
  }
  bool operator()(const LatentSimPrior& p) const {
    const auto& a = require_vector(mj.latent, "latent");
    const auto& b = require_vector(mt.latent, "latent");
    const double d = p.metric == LatentMetric::kL2 ? l2_distance(a, b) : cosine_distance(a, b);
    return d < p.threshold;
  }
  bool operator()(const IdentityPrior& p) const {
    const auto* a = mj.field(p.a);
    const auto* b = mt.field(p.b);
    if (a == nullptr) throw ConfigError("identity prior: observation lacks field '" + p.a + "'");
    if (b == nullptr) throw ConfigError("identity prior: observation lacks field '" + p.b + "'");
    return a->has_value() && b->has_value() && **a == **b;
  }
  bool operator()(const OrPrior& p) const {
    // Every child is evaluated so missing metadata is reported regardless of order.
    bool result = false;
    for (const auto& c : p.children) result = std::visit(*this, c.node) || result;
    return result;
  }
  bool operator()(const AndPrior& p) const {
    bool result = true;
    for (const auto& c : p.children) result = std::visit(*this, c.node) && result;
    return result;
  }
};

// --- parsing ---------------------------------------------------------------

class PriorParser {
 public:
  explicit PriorParser(std::string_view text) : text_(text) {}

  PriorSpec parse() {
    PriorSpec spec = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return spec;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError("prior expression, column " + std::to_string(pos_ + 1) + ": " + message +
                      " in '" + std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string identifier() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (start == pos_) fail("expected an identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  double number() {
    skip_space();
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || !std::isfinite(value)) fail("expected a number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  PriorSpec expression() {
    const std::size_t start = (skip_space(), pos_);
    const std::string name = identifier();
    if (name == "empty") {
      if (peek('(')) {
        expect('(');
        expect(')');
      }
      return PriorSpec::empty();
    }
    expect('(');
    PriorSpec spec;
    if (name == "or" || name == "and") {
      std::vector<PriorSpec> children;
      if (peek(')')) fail("'" + name + "' needs at least one child");
      children.push_back(expression());
      while (peek(',')) {
        ++pos_;
        children.push_back(expression());
      }
      spec = name == "or" ? PriorSpec{OrPrior{std::move(children)}}
                          : PriorSpec{AndPrior{std::move(children)}};
    } else if (name == "temporal") {
      const std::size_t at = (skip_space(), pos_);
      const double k = number();
      if (k <= 0.0 || k != std::floor(k) || k > 1e9) {
        pos_ = at;
        fail("temporal lag must be a positive integer");
      }
      spec = PriorSpec::temporal(static_cast<int>(k));
    } else if (name == "spatial") {
      const std::size_t at = (skip_space(), pos_);
      const double r = number();
      if (r < 0.0) {
        pos_ = at;
        fail("spatial radius must be non-negative");
      }
      spec = PriorSpec::spatial(r);
    } else if (name == "latent") {
      const std::string metric = identifier();
      LatentMetric m;
      if (metric == "l2") {
        m = LatentMetric::kL2;
      } else if (metric == "cosine") {
        m = LatentMetric::kCosine;
      } else {
        fail("unknown latent metric '" + metric + "'");
      }
      expect(',');
      spec = PriorSpec::latent(m, number());
    } else if (name == "identity") {
      std::string a = identifier();
      expect(',');
      std::string b = identifier();
      spec = PriorSpec::identity(std::move(a), std::move(b));
    } else {
      pos_ = start;
      fail("unknown prior '" + name + "'");
    }
    expect(')');
    return spec;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Printer {
  std::string operator()(const EmptyPrior&) const { return "empty()"; }
  std::string operator()(const TemporalPrior& p) const {
    return "temporal(" + std::to_string(p.lag) + ")";
  }
  std::string operator()(const SpatialPrior& p) const {
    return "spatial(" + format_number(p.radius) + ")";
  }
  std::string operator()(const LatentSimPrior& p) const {
    return std::string("latent(") + (p.metric == LatentMetric::kL2 ? "l2" : "cosine") + ", " +
           format_number(p.threshold) + ")";
  }
  std::string operator()(const IdentityPrior& p) const {
    return "identity(" + p.a + ", " + p.b + ")";
  }
  std::string join(const char* name, const std::vector<PriorSpec>& children) const {
    std::string out = std::string(name) + "(";
    for (std::size_t i = 0; i < children.size(); ++i) {
      if (i) out += ", ";
      out += std::visit(*this, children[i].node);
    }
    return out + ")";
  }
  std::string operator()(const OrPrior& p) const { return join("or", p.children); }
  std::string operator()(const AndPrior& p) const { return join("and", p.children); }
};

}  // namespace

bool eval_prior(const PriorSpec& spec, std::size_t j, std::size_t t, const ObservationMeta& meta_j,
                const ObservationMeta& meta_t) {
  if (j >= t) throw ContractError("eval_prior: requires j < t");
  return std::visit(Evaluator{j, t, meta_j, meta_t}, spec.node);
}

PriorSpec parse_prior(std::string_view text) { return PriorParser(text).parse(); }

std::string to_string(const PriorSpec& spec) { return std::visit(Printer{}, spec.node); }

}  // namespace gcm

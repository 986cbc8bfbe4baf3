#include "fsdyn/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "fsdyn/error.hpp"

namespace fsdyn {

struct Potential::Node {
  enum class Kind { constant, coordinate, trig, table, symbol, block, window_sum, lift, sum, scale, abs };
  Kind kind = Kind::constant;
  double c = 0;                // constant value, scale, coordinate scale, decay
  std::size_t index = 0;       // coordinate index, lift offset, block length
  std::size_t length = 0;      // lift length, block alphabet
  std::int64_t position = 0;   // symbol / block start
  std::vector<double> a, b;    // trig coefficients, table values
  std::vector<std::shared_ptr<const Node>> kids;

  double eval(std::span<const double> x) const {
    switch (kind) {
      case Kind::constant:
        return c;
      case Kind::coordinate:
        return c * x[index];
      case Kind::trig: {
        double v = 0, t = 2 * std::numbers::pi * x[index];
        for (std::size_t k = 0; k < a.size(); ++k) v += a[k] * std::cos(static_cast<double>(k) * t);
        for (std::size_t k = 0; k < b.size(); ++k) v += b[k] * std::sin(static_cast<double>(k) * t);
        return v;
      }
      case Kind::table:
        return a[static_cast<std::size_t>(x[0])];
      case Kind::symbol:
        return a[static_cast<std::size_t>(x[window_index(x.size(), position)])];
      case Kind::block: {
        std::size_t code = 0;
        for (std::size_t j = 0; j < index; ++j)
          code = code * length +
                 static_cast<std::size_t>(x[window_index(x.size(), position + static_cast<std::int64_t>(j))]);
        return a[code];
      }
      case Kind::window_sum: {
        const std::size_t r = (x.size() - 1) / 2;
        double v = 0;
        for (std::size_t p = 0; p < x.size(); ++p)
          v += std::pow(c, std::fabs(static_cast<double>(p) - static_cast<double>(r))) * x[p];
        return v;
      }
      case Kind::lift:
        return kids[0]->eval(x.subspan(index, length));
      case Kind::sum: {
        double v = 0;
        for (const auto& k : kids) v += k->eval(x);
        return v;
      }
      case Kind::scale:
        return c * kids[0]->eval(x);
      case Kind::abs:
        return std::fabs(kids[0]->eval(x));
    }
    return 0;
  }

  static std::size_t window_index(std::size_t size, std::int64_t pos) {
    const auto r = static_cast<std::int64_t>((size - 1) / 2);
    if (pos < -r || pos > r) throw DataError("potential reads a position outside the window");
    return static_cast<std::size_t>(pos + r);
  }
};

using Node = Potential::Node;

Potential::Potential() : root_(std::make_shared<Node>()) {}

Potential Potential::constant(double c) {
  auto n = std::make_shared<Node>();
  n->c = c;
  return Potential(n);
}

Potential Potential::coordinate(std::size_t index, double scale) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::coordinate;
  n->index = index;
  n->c = scale;
  return Potential(n);
}

Potential Potential::trig(std::size_t index, std::vector<double> cos_coeffs,
                          std::vector<double> sin_coeffs) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::trig;
  n->index = index;
  n->a = std::move(cos_coeffs);
  n->b = std::move(sin_coeffs);
  return Potential(n);
}

Potential Potential::table(std::vector<double> values) {
  if (values.empty()) throw DataError("potential table is empty");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::table;
  n->a = std::move(values);
  return Potential(n);
}

Potential Potential::symbol(std::int64_t position, std::vector<double> values) {
  if (values.empty()) throw DataError("symbol potential needs one value per symbol");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::symbol;
  n->position = position;
  n->a = std::move(values);
  return Potential(n);
}

Potential Potential::block(std::int64_t start, std::size_t length, std::size_t k,
                           std::vector<double> values) {
  if (length == 0 || k == 0) throw DataError("block potential needs positive length and alphabet");
  if (values.size() != word_count(k, length)) throw DataError("block potential needs k^length values");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::block;
  n->position = start;
  n->index = length;
  n->length = k;
  n->a = std::move(values);
  return Potential(n);
}

Potential Potential::window_sum(double decay) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::window_sum;
  n->c = decay;
  return Potential(n);
}

Potential Potential::lift(Potential inner, std::size_t offset, std::size_t length) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::lift;
  n->index = offset;
  n->length = length;
  n->kids.push_back(inner.root_);
  return Potential(n);
}

Potential operator+(const Potential& a, const Potential& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return Potential::constant(*ca + *cb);
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::sum;
  n->kids = {a.root_, b.root_};
  return Potential(n);
}

Potential operator*(double c, const Potential& a) {
  if (auto ca = a.constant_value()) return Potential::constant(c * *ca);
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::scale;
  n->c = c;
  n->kids = {a.root_};
  return Potential(n);
}

Potential Potential::abs() const {
  if (auto c = constant_value()) return constant(std::fabs(*c));
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::abs;
  n->kids = {root_};
  return Potential(n);
}

double Potential::operator()(std::span<const double> x) const { return root_->eval(x); }

std::optional<double> Potential::constant_value() const {
  if (root_->kind == Node::Kind::constant) return root_->c;
  return std::nullopt;
}

namespace {

bool collect_deps(const Node& n, std::set<std::int64_t>& out) {
  switch (n.kind) {
    case Node::Kind::constant:
      return true;
    case Node::Kind::symbol:
      out.insert(n.position);
      return true;
    case Node::Kind::block:
      for (std::size_t j = 0; j < n.index; ++j) out.insert(n.position + static_cast<std::int64_t>(j));
      return true;
    case Node::Kind::sum:
    case Node::Kind::scale:
    case Node::Kind::abs:
      for (const auto& k : n.kids)
        if (!collect_deps(*k, out)) return false;
      return true;
    default:
      return false;
  }
}

void describe_node(const Node& n, std::ostream& os) {
  switch (n.kind) {
    case Node::Kind::constant: os << n.c; break;
    case Node::Kind::coordinate: os << n.c << "*x[" << n.index << "]"; break;
    case Node::Kind::trig: os << "trig(x[" << n.index << "])"; break;
    case Node::Kind::table: os << "table"; break;
    case Node::Kind::symbol: os << "symbol@" << n.position; break;
    case Node::Kind::block: os << "block@" << n.position << "+" << n.index; break;
    case Node::Kind::window_sum: os << "window_sum(" << n.c << ")"; break;
    case Node::Kind::lift:
      os << "lift[" << n.index << "](";
      describe_node(*n.kids[0], os);
      os << ")";
      break;
    case Node::Kind::sum:
      os << "(";
      describe_node(*n.kids[0], os);
      os << " + ";
      describe_node(*n.kids[1], os);
      os << ")";
      break;
    case Node::Kind::scale:
      os << n.c << "*";
      describe_node(*n.kids[0], os);
      break;
    case Node::Kind::abs:
      os << "|";
      describe_node(*n.kids[0], os);
      os << "|";
      break;
  }
}

}  // namespace

std::optional<std::vector<std::int64_t>> Potential::shift_dependencies() const {
  std::set<std::int64_t> deps;
  if (!collect_deps(*root_, deps)) return std::nullopt;
  return std::vector<std::int64_t>(deps.begin(), deps.end());
}

std::string Potential::describe() const {
  std::ostringstream os;
  describe_node(*root_, os);
  return os.str();
}

double sup_norm(const Potential& phi, const PointSet& points) {
  double s = 0;
  for (std::size_t i = 0; i < points.size(); ++i) s = std::max(s, std::fabs(phi(points[i])));
  return s;
}

double birkhoff_sum(const GeneratorSystem& s, const Potential& phi, const Word& w,
                    std::span<const double> x) {
  double total = 0;
  for (const auto& p : evaluation_orbit(s, w, x)) total += phi(p);
  return total;
}

Potential product_potential(const ProductSystem& p, const Potential& phi1, const Potential& phi2) {
  const std::size_t d1 = p.first()->dimension(), d2 = p.second()->dimension();
  return Potential::lift(phi1, 0, d1) + Potential::lift(phi2, d1, d2);
}

Potential skew_potential(const SkewProductSystem& s, const Potential& phi, double c) {
  return Potential::constant(c) + Potential::lift(phi, s.base_dimension(), s.fiber()->dimension());
}

}  // namespace fsdyn

#include "subctrl/fields.hpp"

#include <cmath>
#include <sstream>

#include "subctrl/document.hpp"
#include "subctrl/errors.hpp"
#include "subctrl/expression.hpp"

namespace subctrl {

VectorFieldSet::VectorFieldSet(std::string name, int dimension, std::vector<Field> fields)
    : name_(std::move(name)), dimension_(dimension), fields_(std::move(fields)) {
  if (dimension_ < 1) throw ConfigError("field dimension must be positive");
  if (fields_.empty()) throw ConfigError("a field set needs at least one field (m >= 1)");
  if (count() > dimension_) {
    throw ConfigError("field count m = " + std::to_string(count()) + " exceeds dimension d = " +
                      std::to_string(dimension_));
  }
}

Eigen::MatrixXd VectorFieldSet::eval_fields(std::span<const double> x) const {
  Eigen::MatrixXd table(dimension_, count());
  for (int i = 0; i < count(); ++i) {
    fields_[i].value(x, std::span<double>(table.col(i).data(), dimension_));
    for (int a = 0; a < dimension_; ++a) {
      if (!std::isfinite(table(a, i))) {
        std::ostringstream msg;
        msg << "field g" << (i + 1) << " is non-finite at x = (";
        for (std::size_t k = 0; k < x.size(); ++k) msg << (k ? ", " : "") << x[k];
        msg << ")";
        throw EvaluationError(msg.str());
      }
    }
  }
  return table;
}

Eigen::MatrixXd VectorFieldSet::jacobian(int i, std::span<const double> x) const {
  if (!has_jacobian(i)) throw ConfigError("field g" + std::to_string(i + 1) + " has no Jacobian");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> jac(dimension_, dimension_);
  fields_[i].jacobian(x, std::span<double>(jac.data(), jac.size()));
  return jac;
}

namespace {

using Field = VectorFieldSet::Field;

Field constant_field(std::vector<double> value, std::vector<std::string> text) {
  const auto d = value.size();
  return Field{
      [value](std::span<const double>, std::span<double> out) {
        std::copy(value.begin(), value.end(), out.begin());
      },
      [d](std::span<const double>, std::span<double> jac) {
        std::fill(jac.begin(), jac.begin() + static_cast<long>(d * d), 0.0);
      },
      std::move(text)};
}

VectorFieldSet make_heisenberg() {
  Field g1{[](std::span<const double> x, std::span<double> out) {
             out[0] = 1.0;
             out[1] = 0.0;
             out[2] = -x[1] / 2;
           },
           [](std::span<const double>, std::span<double> jac) {
             std::fill(jac.begin(), jac.begin() + 9, 0.0);
             jac[2 * 3 + 1] = -0.5;
           },
           {"1", "0", "-x2/2"}};
  Field g2{[](std::span<const double> x, std::span<double> out) {
             out[0] = 0.0;
             out[1] = 1.0;
             out[2] = x[0] / 2;
           },
           [](std::span<const double>, std::span<double> jac) {
             std::fill(jac.begin(), jac.begin() + 9, 0.0);
             jac[2 * 3 + 0] = 0.5;
           },
           {"0", "1", "x1/2"}};
  return VectorFieldSet("heisenberg", 3, {std::move(g1), std::move(g2)});
}

VectorFieldSet make_grushin() {
  Field g2{[](std::span<const double> x, std::span<double> out) {
             out[0] = 0.0;
             out[1] = x[0];
           },
           [](std::span<const double>, std::span<double> jac) {
             std::fill(jac.begin(), jac.begin() + 4, 0.0);
             jac[1 * 2 + 0] = 1.0;
           },
           {"0", "x1"}};
  return VectorFieldSet("grushin", 2, {constant_field({1.0, 0.0}, {"1", "0"}), std::move(g2)});
}

VectorFieldSet make_unicycle() {
  Field g1{[](std::span<const double> x, std::span<double> out) {
             out[0] = std::cos(x[2]);
             out[1] = std::sin(x[2]);
             out[2] = 0.0;
           },
           [](std::span<const double> x, std::span<double> jac) {
             std::fill(jac.begin(), jac.begin() + 9, 0.0);
             jac[0 * 3 + 2] = -std::sin(x[2]);
             jac[1 * 3 + 2] = std::cos(x[2]);
           },
           {"cos(x3)", "sin(x3)", "0"}};
  return VectorFieldSet("unicycle", 3,
                        {std::move(g1), constant_field({0.0, 0.0, 1.0}, {"0", "0", "1"})});
}

}  // namespace

const std::vector<std::string>& builtin_field_names() {
  static const std::vector<std::string> names = {"axis2d", "axis3d-degenerate", "heisenberg",
                                                 "grushin", "unicycle"};
  return names;
}

VectorFieldSet builtin_fields(std::string_view name) {
  if (name == "axis2d") {
    return VectorFieldSet("axis2d", 2,
                          {constant_field({1.0, 0.0}, {"1", "0"}), constant_field({0.0, 1.0}, {"0", "1"})});
  }
  if (name == "axis3d-degenerate") {
    return VectorFieldSet("axis3d-degenerate", 3,
                          {constant_field({1.0, 0.0, 0.0}, {"1", "0", "0"}),
                           constant_field({0.0, 1.0, 0.0}, {"0", "1", "0"})});
  }
  if (name == "heisenberg") return make_heisenberg();
  if (name == "grushin") return make_grushin();
  if (name == "unicycle") return make_unicycle();
  std::string valid;
  for (const auto& n : builtin_field_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown builtin field system '" + std::string(name) + "'; valid options: " + valid);
}

VectorFieldSet fields_from_expressions(std::string name, int dimension,
                                       const std::vector<std::vector<std::string>>& components) {
  if (components.empty()) throw ConfigError("a field set needs at least one field (m >= 1)");
  std::vector<Field> fields;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& comp = components[i];
    if (static_cast<int>(comp.size()) != dimension) {
      throw ConfigError("dimension mismatch: field g" + std::to_string(i + 1) + " has " +
                        std::to_string(comp.size()) + " components but dimension is " +
                        std::to_string(dimension));
    }
    std::vector<Expression> exprs;
    for (std::size_t a = 0; a < comp.size(); ++a) {
      Expression e = Expression::parse(comp[a]);
      if (e.max_variable() > dimension) {
        throw ConfigError("dimension mismatch: component " + std::to_string(a + 1) + " of g" +
                          std::to_string(i + 1) + " ('" + comp[a] + "') references x" +
                          std::to_string(e.max_variable()) + " but dimension is " +
                          std::to_string(dimension));
      }
      exprs.push_back(std::move(e));
    }
    Field field;
    field.value = [exprs](std::span<const double> x, std::span<double> out) {
      for (std::size_t a = 0; a < exprs.size(); ++a) out[a] = exprs[a].evaluate(x);
    };
    field.jacobian = [exprs](std::span<const double> x, std::span<double> jac) {
      const std::size_t d = exprs.size();
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
          jac[a * d + b] = exprs[a].evaluate_with_derivative(x, static_cast<int>(b)).second;
        }
      }
    };
    field.components = comp;
    fields.push_back(std::move(field));
  }
  return VectorFieldSet(std::move(name), dimension, std::move(fields));
}

VectorFieldSet parse_field_config(std::string_view text) {
  const Document doc = Document::parse(text);
  const DocSection* root = doc.section("");
  if (root == nullptr || root->find("dimension") == nullptr) {
    throw ConfigError("field config must declare 'dimension'");
  }
  const DocValue* fields_value = root->find("fields");
  if (fields_value == nullptr) throw ConfigError("field config must declare 'fields'");
  const long d = doc_integer(*root->find("dimension"), "dimension");
  if (d < 1) throw ConfigError("'dimension' must be positive");
  std::vector<std::vector<std::string>> components;
  for (const auto& item : doc_array(*fields_value, "fields")) {
    components.push_back(doc_string_list(item, "fields"));
  }
  if (const DocValue* count = root->find("count")) {
    const long m = doc_integer(*count, "count");
    if (m < 1) throw ConfigError("'count' must be at least 1 (m = 0 declares no fields)");
    if (m != static_cast<long>(components.size())) {
      throw ConfigError("'count' = " + std::to_string(m) + " but " + std::to_string(components.size()) +
                        " fields are listed");
    }
  }
  if (components.empty()) throw ConfigError("field config declares no fields (m = 0)");
  return fields_from_expressions("custom", static_cast<int>(d), components);
}

std::string serialize_fields(const VectorFieldSet& fields) {
  std::ostringstream out;
  out << "dimension = " << fields.dimension() << "\n";
  out << "count = " << fields.count() << "\n";
  out << "fields = [\n";
  for (int i = 0; i < fields.count(); ++i) {
    out << "  [";
    const auto& comp = fields.components(i);
    for (std::size_t a = 0; a < comp.size(); ++a) out << (a ? ", " : "") << '"' << comp[a] << '"';
    out << "]" << (i + 1 < fields.count() ? "," : "") << "\n";
  }
  out << "]\n";
  return out.str();
}

}  // namespace subctrl

#include "evreg/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>

#include "evreg/error.hpp"

namespace evreg {

// ---------------------------------------------------------------------------
// Formula parsing

std::string to_string(const Term& term) {
  switch (term.kind) {
    case TermKind::Intercept:
      return "1";
    case TermKind::Linear:
      return term.covariate;
    case TermKind::Power:
      return "pow(" + term.covariate + ")";
  }
  return {};
}

bool PredictorSpec::is_linear() const {
  return std::none_of(terms.begin(), terms.end(),
                      [](const Term& t) { return t.kind == TermKind::Power; });
}

bool PredictorSpec::is_intercept_only() const {
  return terms.size() == 1 && terms.front().kind == TermKind::Intercept;
}

namespace {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : text_(text) {}

  PredictorSpec parse() {
    PredictorSpec spec;
    for (;;) {
      skip_space();
      const std::size_t start = pos_;
      Term term = parse_term();
      check_duplicate(spec, term, start);
      spec.terms.push_back(std::move(term));
      skip_space();
      if (pos_ == text_.size()) break;
      if (text_[pos_] != '+') throw SyntaxError("expected '+' or end of formula", pos_);
      ++pos_;
    }
    return spec;
  }

 private:
  static bool name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string parse_name() {
    if (pos_ >= text_.size() || !name_start(text_[pos_])) {
      throw SyntaxError("expected covariate name", pos_);
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && name_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Term parse_term() {
    if (pos_ >= text_.size()) throw SyntaxError("expected term", pos_);
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && name_char(text_[pos_])) ++pos_;
      if (text_.substr(start, pos_ - start) != "1") {
        throw SyntaxError("only the constant 1 is allowed as a numeric term", start);
      }
      return {TermKind::Intercept, {}};
    }
    if (!name_start(c)) throw SyntaxError("expected term", pos_);
    std::string name = parse_name();
    if (name == "pow") {
      const std::size_t save = pos_;
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        ++pos_;
        skip_space();
        std::string inner = parse_name();
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != ')') throw SyntaxError("expected ')'", pos_);
        ++pos_;
        return {TermKind::Power, std::move(inner)};
      }
      pos_ = save;
    }
    return {TermKind::Linear, std::move(name)};
  }

  static void check_duplicate(const PredictorSpec& spec, const Term& term, std::size_t at) {
    if (std::find(spec.terms.begin(), spec.terms.end(), term) == spec.terms.end()) return;
    if (term.kind == TermKind::Intercept) throw SyntaxError("duplicate intercept", at);
    throw SyntaxError("duplicate term '" + to_string(term) + "'", at);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

PredictorSpec parse_formula(std::string_view text) { return FormulaParser(text).parse(); }

std::string to_string(const PredictorSpec& spec) {
  std::string out;
  for (std::size_t j = 0; j < spec.terms.size(); ++j) {
    if (j > 0) out += " + ";
    out += to_string(spec.terms[j]);
  }
  return spec.negated ? "-(" + out + ")" : out;
}

// ---------------------------------------------------------------------------
// Links

std::string_view to_string(LinkKind kind) { return kind == LinkKind::Identity ? "identity" : "log"; }

LinkKind parse_link(std::string_view text) {
  if (text == "identity") return LinkKind::Identity;
  if (text == "log") return LinkKind::Log;
  throw std::invalid_argument("unknown link '" + std::string(text) + "' (expected identity or log)");
}

double Link::apply(double mu) const { return kind == LinkKind::Identity ? mu : std::log(mu); }
double Link::inverse(double eta) const { return kind == LinkKind::Identity ? eta : std::exp(eta); }
double Link::inverse_d1(double eta) const { return kind == LinkKind::Identity ? 1.0 : std::exp(eta); }
double Link::inverse_d2(double eta) const { return kind == LinkKind::Identity ? 0.0 : std::exp(eta); }

// ---------------------------------------------------------------------------
// ModelSpec

std::vector<std::string> ModelSpec::parameter_names() const {
  auto term_name = [](const Term& t) {
    return t.kind == TermKind::Intercept ? std::string("intercept") : to_string(t);
  };
  std::vector<std::string> names;
  for (const Term& t : location.terms) names.push_back(term_name(t));
  for (const Term& t : dispersion.terms) names.push_back("dispersion:" + term_name(t));
  return names;
}

std::size_t ModelSpec::resolve_parameter(std::string_view name) const {
  if (!name.empty() && std::all_of(name.begin(), name.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    std::size_t index = 0;
    std::from_chars(name.data(), name.data() + name.size(), index);
    if (index >= num_params()) throw std::invalid_argument("parameter index out of range");
    return index;
  }
  const auto names = parameter_names();
  std::string key(name);
  if (key.starts_with("location:")) key = key.substr(9);
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == key) return j;
  }
  throw std::invalid_argument("unknown parameter '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (location.terms.empty()) throw std::invalid_argument("location predictor has no terms");
  if (dispersion.terms.empty()) throw std::invalid_argument("dispersion predictor has no terms");
  if (location_link.kind != LinkKind::Identity) {
    throw std::invalid_argument("only the identity location link is supported");
  }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<double> response) : response_(std::move(response)) {}

void Dataset::add_column(std::string name, std::vector<double> values) {
  if (values.size() != response_.size()) {
    throw DataError("column '" + name + "' has " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(response_.size()));
  }
  if (has_column(name)) throw DataError("duplicate column '" + name + "'");
  names_.push_back(std::move(name));
  columns_.push_back(std::move(values));
}

bool Dataset::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& Dataset::column(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw DataError("missing covariate column '" + std::string(name) + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + std::string(column) +
                    "': cannot parse '" + std::string(field) + "' as a number");
  }
  return value;
}

}  // namespace

Dataset read_csv(std::istream& in, std::string_view response) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    for (auto f : split_csv_line(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw DataError("CSV input has no header row");
  const auto resp_it = std::find(header.begin(), header.end(), response);
  if (resp_it == header.end()) throw DataError("missing response column '" + std::string(response) + "'");
  const std::size_t resp_col = static_cast<std::size_t>(resp_it - header.begin());

  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      cols[j].push_back(parse_number(fields[j], line_no, header[j]));
    }
  }
  Dataset data(std::move(cols[resp_col]));
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != resp_col) data.add_column(header[j], std::move(cols[j]));
  }
  return data;
}

Dataset read_csv_file(const std::string& path, std::string_view response) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, response);
}

// ---------------------------------------------------------------------------
// Predictor evaluation

BoundPredictor::BoundPredictor(PredictorSpec spec, const Dataset& data) : spec_(std::move(spec)) {
  const auto n = static_cast<Eigen::Index>(data.n());
  columns_.resize(n, static_cast<Eigen::Index>(spec_.size()));
  for (std::size_t j = 0; j < spec_.size(); ++j) {
    const Term& term = spec_.terms[j];
    auto col = columns_.col(static_cast<Eigen::Index>(j));
    if (term.kind == TermKind::Intercept) {
      col.setOnes();
      continue;
    }
    const auto& values = data.column(term.covariate);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double x = values[static_cast<std::size_t>(t)];
      if (!std::isfinite(x)) throw DataError("non-finite value in column '" + term.covariate + "'");
      if (term.kind == TermKind::Power && !(x > 0.0)) {
        throw DomainError("pow(" + term.covariate + ") requires strictly positive covariate values");
      }
      col(t) = x;
    }
  }
}

PredictorEval BoundPredictor::evaluate(const Eigen::Ref<const Eigen::VectorXd>& params) const {
  const Eigen::Index n = columns_.rows();
  const Eigen::Index p = columns_.cols();
  if (params.size() != p) throw std::invalid_argument("predictor parameter count mismatch");
  PredictorEval out{Eigen::VectorXd::Zero(n), Eigen::MatrixXd(n, p), Eigen::MatrixXd::Zero(n, p)};
  for (Eigen::Index j = 0; j < p; ++j) {
    const Term& term = spec_.terms[static_cast<std::size_t>(j)];
    const double b = params(j);
    if (term.kind != TermKind::Power) {
      out.jacobian.col(j) = columns_.col(j);
      out.value += b * columns_.col(j);
      continue;
    }
    for (Eigen::Index t = 0; t < n; ++t) {
      const double x = columns_(t, j);
      const double lx = std::log(x);
      // x^0 == 1 exactly, so b = 0 is a regular point with slope ln x.
      const double xb = std::pow(x, b);
      out.value(t) += xb;
      out.jacobian(t, j) = xb * lx;
      out.curvature(t, j) = xb * lx * lx;
    }
  }
  if (spec_.negated) {
    out.value = -out.value;
    out.jacobian = -out.jacobian;
    out.curvature = -out.curvature;
  }
  return out;
}

PredictorEval eval_predictor(const PredictorSpec& spec,
                             const Eigen::Ref<const Eigen::VectorXd>& params,
                             const Dataset& data) {
  return BoundPredictor(spec, data).evaluate(params);
}

// ---------------------------------------------------------------------------
// Min -> Max and binding

std::pair<ModelSpec, Dataset> to_max_form(const ModelSpec& model, const Dataset& data) {
  if (model.tail != Tail::Min) throw std::invalid_argument("to_max_form: model is already a maximum model");
  if (model.location_link.kind != LinkKind::Identity) {
    throw std::invalid_argument("to_max_form: only the identity location link is supported");
  }
  ModelSpec out = model;
  out.tail = Tail::Max;
  out.location.negated = !model.location.negated;
  Dataset flipped = data;
  for (double& y : flipped.mutable_response()) y = -y;
  return {std::move(out), std::move(flipped)};
}

BoundModel::BoundModel(const ModelSpec& model, const Dataset& data) : original_(model) {
  model.validate();
  if (model.num_params() >= data.n()) {
    throw DataError("need more observations (" + std::to_string(data.n()) +
                    ") than parameters (" + std::to_string(model.num_params()) + ")");
  }
  for (double y : data.response()) {
    if (!std::isfinite(y)) throw DataError("response contains non-finite values");
  }
  if (model.tail == Tail::Min) {
    auto [max_model, max_data] = to_max_form(model, data);
    spec_ = std::move(max_model);
    y_ = Eigen::Map<const Eigen::VectorXd>(max_data.response().data(),
                                           static_cast<Eigen::Index>(max_data.n()));
  } else {
    spec_ = model;
    y_ = Eigen::Map<const Eigen::VectorXd>(data.response().data(), static_cast<Eigen::Index>(data.n()));
  }
  location_ = BoundPredictor(spec_.location, data);
  dispersion_ = BoundPredictor(spec_.dispersion, data);
}

bool BoundModel::is_linear_homoskedastic() const {
  return spec_.location_link.kind == LinkKind::Identity && spec_.location.is_linear() &&
         spec_.dispersion_link.kind == LinkKind::Identity && spec_.dispersion.is_intercept_only();
}

}  // namespace evreg

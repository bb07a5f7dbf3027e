#include "attacklab/gnn_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace attacklab {

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

const char* aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::Mean:
      return "mean";
    case Aggregator::Sum:
      return "sum";
    case Aggregator::Attention:
      return "attention";
  }
  return "?";
}

Aggregator parse_aggregator(const std::string& s) {
  if (s == "mean") return Aggregator::Mean;
  if (s == "sum") return Aggregator::Sum;
  if (s == "attention") return Aggregator::Attention;
  throw ConfigError("unknown aggregator '" + s + "'");
}

}  // namespace

void write_param_block(std::ostream& out, const ad::Parameter& p) {
  out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
  for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(p.value(i, j));
    }
    out << '\n';
  }
}

ad::Parameter read_param_block(std::istream& in, int& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(line_no + 1, "expected param block");
  ++line_no;
  std::istringstream header(line);
  std::string tag, name;
  Eigen::Index rows = 0, cols = 0;
  if (!(header >> tag >> name >> rows >> cols) || tag != "param" || rows < 0 || cols < 0)
    throw ParseError(line_no, "bad param header");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "truncated param block");
    ++line_no;
    std::istringstream row(line);
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(row >> m(i, j))) throw ParseError(line_no, "expected " + std::to_string(cols) + " values");
  }
  return {std::move(m), std::move(name)};
}

void write_model(const GnnModel& model, std::ostream& out) {
  const GnnConfig& cfg = model.config();
  out << "#gnn-model v1 " << arch_name(cfg.arch) << ' ' << cfg.num_layers << ' ' << cfg.hidden_dim
      << ' ' << combine_name(cfg.combine) << '\n';
  const GnnConfig def = GnnConfig::defaults(cfg.arch);
  if (cfg.aggregator != def.aggregator) out << "aggregator " << aggregator_name(cfg.aggregator) << '\n';
  if (cfg.attention_heads != 1) out << "heads " << cfg.attention_heads << '\n';
  for (const auto& p : model.encoder.params) write_param_block(out, p);
  write_param_block(out, model.head_weight);
  write_param_block(out, model.head_bias);
}

void save_model(const GnnModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_model: cannot open " + path);
  write_model(model, out);
  if (!out) throw Error("save_model: write failed for " + path);
}

GnnModel read_model(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty model file");
  ++line_no;
  std::istringstream header(line);
  std::string magic, version, arch, combine;
  GnnConfig cfg;
  if (!(header >> magic >> version >> arch >> cfg.num_layers >> cfg.hidden_dim >> combine) ||
      magic != "#gnn-model" || version != "v1")
    throw ParseError(line_no, "expected '#gnn-model v1 <arch> <layers> <hidden> <combine>'");
  cfg.arch = parse_arch(arch);
  cfg.combine = parse_combine(combine);
  cfg.aggregator = GnnConfig::defaults(cfg.arch).aggregator;

  // Optional meta lines before the first param block.
  std::vector<ad::Parameter> params;
  while (true) {
    const auto pos = in.tellg();
    if (!std::getline(in, line)) break;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "aggregator") {
      std::string v;
      if (!(ss >> v)) throw ParseError(line_no + 1, "bad aggregator line");
      ++line_no;
      cfg.aggregator = parse_aggregator(v);
    } else if (tag == "heads") {
      if (!(ss >> cfg.attention_heads)) throw ParseError(line_no + 1, "bad heads line");
      ++line_no;
    } else {
      in.seekg(pos);
      break;
    }
  }
  while (in.peek() != EOF) params.push_back(read_param_block(in, line_no));

  if (params.size() < 3) throw ParseError(line_no, "model file has too few param blocks");
  cfg.validate();

  GnnModel model;
  model.head_bias = std::move(params.back());
  params.pop_back();
  model.head_weight = std::move(params.back());
  params.pop_back();
  if (model.head_weight.name != "head.weight" || model.head_bias.name != "head.bias")
    throw ParseError(line_no, "model file must end with head.weight and head.bias");

  model.encoder.config = cfg;
  model.encoder.params = std::move(params);
  if (cfg.arch == GnnArch::Gat)
    model.encoder.feature_dim = static_cast<int>(model.encoder.param("layer0.head0.weight").value.rows());
  else {
    const auto& w0 = model.encoder.param("layer0.weight").value;
    model.encoder.feature_dim =
        static_cast<int>(cfg.combine == Combine::Concat ? w0.rows() / 2 : w0.rows());
  }
  model.encoder.output_dim = static_cast<int>(model.head_weight.value.rows());
  return model;
}

GnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_model: cannot open " + path);
  return read_model(in);
}

}  // namespace attacklab

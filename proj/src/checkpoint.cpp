#include "noisecurve/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {
namespace {

using nlohmann::json;

json flat_array(const Tensor& t) {
  json data = json::array();
  for (double v : t.data()) data.push_back(fmt17(v));
  return data;
}

std::vector<double> parse_flat(const json& j, std::size_t expected,
                               const std::string& what) {
  std::vector<double> data;
  data.reserve(j.size());
  for (const auto& s : j) data.push_back(parse_double(s.get<std::string>()));
  if (data.size() != expected)
    fail(ErrorCode::format_header, what + ": element count mismatch");
  return data;
}

const char* mode_name(CentroidMode m) {
  switch (m) {
    case CentroidMode::naive: return "naive";
    case CentroidMode::momentum: return "momentum";
    case CentroidMode::partial: return "partial";
  }
  fail(ErrorCode::internal, "unknown centroid mode");
}

CentroidMode mode_from(const std::string& s) {
  if (s == "naive") return CentroidMode::naive;
  if (s == "momentum") return CentroidMode::momentum;
  if (s == "partial") return CentroidMode::partial;
  fail(ErrorCode::format_header, "unknown centroid mode: " + s);
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  json j;
  j["version"] = ck.version;
  j["seed"] = ck.seed;

  // Shapes live in layer_dims; every tensor is stored flat, row-major,
  // as decimal strings so reload reproduces identical text.
  json dims = json::array();
  dims.push_back(ck.model.in_dim());
  for (const auto& layer : ck.model.layers) dims.push_back(layer.w.rows());
  j["layer_dims"] = std::move(dims);

  json acts = json::array();
  for (const auto& layer : ck.model.layers)
    acts.push_back(layer.relu_after ? "relu" : "linear");
  j["activations"] = std::move(acts);

  json params;
  for (std::size_t i = 0; i < ck.model.layers.size(); ++i) {
    params["layer." + std::to_string(i) + ".w"] = flat_array(ck.model.layers[i].w);
    params["layer." + std::to_string(i) + ".b"] = flat_array(ck.model.layers[i].b);
  }
  params["head.w"] = flat_array(ck.model.head_w);
  params["head.b"] = flat_array(ck.model.head_b);
  j["params"] = std::move(params);

  json loss;
  loss["alpha"] = fmt17(ck.loss.alpha);
  loss["beta"] = fmt17(ck.loss.beta);
  loss["gamma_reg"] = fmt17(ck.loss.gamma_reg);
  loss["lambda"] = fmt17(ck.loss.lambda);
  loss["delta_v"] = fmt17(ck.loss.delta_v);
  loss["delta_d"] = fmt17(ck.loss.delta_d);
  j["loss_config"] = std::move(loss);

  json cent;
  cent["gamma"] = fmt17(ck.centroids.gamma);
  cent["mode"] = mode_name(ck.centroids.mode);
  json values;
  for (const auto& [cls, m] : ck.centroids.previous)
    values[std::to_string(cls)] = flat_array(m);
  cent["values"] = std::move(values);
  j["centroids"] = std::move(cent);

  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::format_header, std::string("checkpoint parse: ") + e.what());
  }
  try {
    Checkpoint ck;
    ck.version = j.at("version").get<int>();
    if (ck.version != 1)
      fail(ErrorCode::format_header, "unsupported checkpoint version " + std::to_string(ck.version));
    ck.seed = j.at("seed").get<std::uint64_t>();

    const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    if (dims.size() < 2) fail(ErrorCode::format_header, "checkpoint has no layers");
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    if (acts.size() != dims.size() - 1)
      fail(ErrorCode::format_header, "activation count disagrees with layer_dims");

    const json& params = j.at("params");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      BackboneLayer layer;
      const std::string stem = "layer." + std::to_string(i);
      layer.w = Tensor::matrix(dims[i + 1], dims[i],
                               parse_flat(params.at(stem + ".w"),
                                          dims[i + 1] * dims[i], stem + ".w"));
      layer.b = Tensor::vector(parse_flat(params.at(stem + ".b"), dims[i + 1],
                                          stem + ".b"));
      if (acts[i] != "relu" && acts[i] != "linear")
        fail(ErrorCode::format_header, "unknown activation: " + acts[i]);
      layer.relu_after = acts[i] == "relu";
      ck.model.layers.push_back(std::move(layer));
    }
    const json& head_b = params.at("head.b");
    const std::size_t classes = head_b.size();
    if (classes < 2) fail(ErrorCode::format_header, "head needs at least two classes");
    ck.model.head_b = Tensor::vector(parse_flat(head_b, classes, "head.b"));
    ck.model.head_w = Tensor::matrix(classes, dims.back(),
                                     parse_flat(params.at("head.w"),
                                                classes * dims.back(), "head.w"));

    const json& loss = j.at("loss_config");
    ck.loss.alpha = parse_double(loss.at("alpha").get<std::string>());
    ck.loss.beta = parse_double(loss.at("beta").get<std::string>());
    ck.loss.gamma_reg = parse_double(loss.at("gamma_reg").get<std::string>());
    ck.loss.lambda = parse_double(loss.at("lambda").get<std::string>());
    ck.loss.delta_v = parse_double(loss.at("delta_v").get<std::string>());
    ck.loss.delta_d = parse_double(loss.at("delta_d").get<std::string>());

    const json& cent = j.at("centroids");
    ck.centroids.gamma = parse_double(cent.at("gamma").get<std::string>());
    ck.centroids.mode = mode_from(cent.at("mode").get<std::string>());
    for (const auto& [key, value] : cent.at("values").items()) {
      std::size_t pos = 0;
      const int cls = std::stoi(key, &pos);
      if (pos != key.size()) fail(ErrorCode::format_header, "bad centroid class id: " + key);
      ck.centroids.previous[cls] =
          Tensor::vector(parse_flat(value, dims.back(), "centroid " + key));
    }
    return ck;
  } catch (const json::exception& e) {
    fail(ErrorCode::format_header, std::string("checkpoint structure: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::format_header, "checkpoint structure: bad numeric field");
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string text = checkpoint_to_json(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace noisecurve

#include "nfcast/dataset.hpp"

#include <fstream>

#include "nfcast/baseline.hpp"
#include "nfcast/error.hpp"
#include "nfcast/gnn.hpp"

namespace nfcast {

namespace fs = std::filesystem;

PreparedData prepare_dataset(std::vector<FlowRecord> flows, const DatasetOptions& options) {
  PreparedData data;
  data.options = options;
  flows = sort_by_start(std::move(flows));
  if (!flows.empty()) data.n_features = flows.front().numerics.size();
  for (auto& w : make_windows(flows, options.window_length, options.stride)) {
    data.windows.push_back(std::make_shared<const Window>(std::move(w)));
  }
  data.splits = split_windows(data.windows.size(), options.ratios, options.split_seed);
  std::vector<Window> train;
  for (auto i : data.splits.indices(Split::Train)) train.push_back(*data.windows[i]);
  data.vocab = build_ip_vocabulary(train);
  for (const auto& w : data.windows) {
    data.graphs.push_back(std::make_shared<const WindowGraph>(build_graph(*w, data.vocab, options.d_place)));
  }
  return data;
}

void write_dataset(const fs::path& dir, const PreparedData& data) {
  fs::create_directories(dir);
  std::vector<FlowRecord> flows;
  for (const auto& w : data.windows) flows.insert(flows.end(), w->records.begin(), w->records.end());
  write_flow_csv(dir / "flows.csv", flows);
  data.vocab.write_csv(dir / "vocab.csv");
  write_split_csv(dir / "splits.csv", data.splits);
  std::vector<WindowGraph> graphs;
  for (const auto& g : data.graphs) graphs.push_back(*g);
  write_graph_cache(dir / "graphs", graphs);

  Config meta;
  meta.set("window_length", std::to_string(data.options.window_length));
  meta.set("stride", std::to_string(data.options.stride));
  meta.set("split_seed", std::to_string(data.options.split_seed));
  meta.set("d_place", std::to_string(data.options.d_place));
  meta.set("n_windows", std::to_string(data.windows.size()));
  meta.set("n_features", std::to_string(data.n_features));
  meta.write(dir / "meta.txt");
}

PreparedData load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "no data directory " + dir.string());
  const Config meta = Config::read(dir / "meta.txt");
  PreparedData data;
  data.options.window_length = meta.get_size("window_length", 512);
  data.options.stride = meta.get_size("stride", data.options.window_length);
  data.options.split_seed = meta.get_u64("split_seed", 0);
  data.options.d_place = meta.get_size("d_place", 8);
  data.n_features = meta.get_size("n_features", 0);

  const auto flows = parse_flow_csv(dir / "flows.csv");
  for (auto& w : make_windows(flows, data.options.window_length, data.options.window_length)) {
    data.windows.push_back(std::make_shared<const Window>(std::move(w)));
  }
  if (data.windows.size() != meta.get_size("n_windows", 0)) {
    throw Error(ErrorKind::Corrupt, "flows.csv does not match the recorded window count");
  }
  data.vocab = IpVocabulary::read_csv(dir / "vocab.csv");
  data.splits = read_split_csv(dir / "splits.csv");
  if (data.splits.labels.size() != data.windows.size()) {
    throw Error(ErrorKind::Corrupt, "splits.csv does not cover every window");
  }
  auto graphs = read_graph_cache(dir / "graphs");
  if (graphs.size() != data.windows.size()) throw Error(ErrorKind::Corrupt, "graph cache does not cover every window");
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].window_index != data.windows[i]->window_index || graphs[i].n_conn() != data.windows[i]->records.size()) {
      throw Error(ErrorKind::Corrupt, "graph " + std::to_string(i) + " does not match its window");
    }
    data.graphs.push_back(std::make_shared<const WindowGraph>(std::move(graphs[i])));
  }
  return data;
}

SplitExamples build_examples(const PreparedData& data) {
  SplitExamples out;
  const auto pairs = pair_windows(data.graphs);
  // Graph positions follow window positions, so a window index locates both.
  std::vector<std::size_t> position(data.graphs.empty() ? 0 : data.graphs.back()->window_index + 1, 0);
  for (std::size_t i = 0; i < data.graphs.size(); ++i) position[data.graphs[i]->window_index] = i;
  for (const auto& p : pairs) {
    const std::size_t i = position[p.current->window_index];
    out.of(data.splits.labels[i]).push_back(make_example(data.windows[i], p.current, p.next));
  }
  return out;
}

std::unique_ptr<ForecastModel> make_model(ModelKind kind, const Config& c, const PreparedData& data,
                                          std::uint64_t seed) {
  if (kind == ModelKind::Gnn) {
    GnnDims dims;
    dims.conn_width = data.n_features + kProtocolCategories;
    dims.d_place = data.options.d_place;
    dims.n_ip_classes = data.vocab.size();
    return std::make_unique<GnnModel>(dims, gnn_hyper_from(c), seed);
  }
  BaselineDims dims;
  dims.n_features = data.n_features;
  dims.seq_len = data.options.window_length;
  dims.n_ip_classes = data.vocab.size();
  const auto backbone = kind == ModelKind::DLinear ? BackboneKind::DLinear : BackboneKind::Lstm;
  return std::make_unique<BaselineModel>(dims, baseline_hyper_from(c, backbone), seed);
}

}  // namespace nfcast

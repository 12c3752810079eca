#include "pit/records.hpp"

#include <json.hpp>
#include <sstream>

#include "pit/data.hpp"

namespace pit {

using nlohmann::json;

std::string history_to_jsonl(const History& history, const std::string& phase) {
  std::ostringstream os;
  os << json{{"phase", phase}, {"epoch", 0}, {"val_task", history.initial_task},
             {"lambda_r", history.initial_weighted}}
            .dump()
     << '\n';
  for (const auto& e : history.epochs) {
    os << json{{"phase", e.phase},        {"epoch", e.epoch},       {"train_task", e.train_task},
               {"lambda_r", e.train_weighted}, {"val_loss", e.val_loss}, {"val_metric", e.val_metric},
               {"params", e.params},      {"macs", e.macs},         {"improved", e.improved}}
              .dump()
       << '\n';
  }
  return os.str();
}

std::string point_to_json(const ParetoPoint& p, bool on_front) {
  json layers = json::array();
  for (const auto& l : p.arch.layers) {
    layers.push_back({{"name", l.name},
                      {"kind", to_string(l.kind)},
                      {"c_out", l.c_out},
                      {"k", l.kernel_size},
                      {"d", l.dilation},
                      {"f", l.receptive_field},
                      {"eliminated", l.eliminated}});
  }
  json j{{"lambda", p.lambda},
         {"reg", to_string(p.reg_kind)},
         {"rng_seed", p.rng_seed},
         {"metric", p.metric_name},
         {"value", p.metric_value},
         {"val_metric", p.val_metric},
         {"params", p.params},
         {"params_with_bias", p.arch.params_with_bias},
         {"macs", p.macs},
         {"checkpoint", p.checkpoint_path},
         {"flags", p.flags},
         {"error", p.error},
         {"front", on_front},
         {"arch", layers}};
  return j.dump();
}

ParetoPoint point_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
    ParetoPoint p;
    p.lambda = j.at("lambda").get<double>();
    p.reg_kind = parse_reg_kind(j.at("reg").get<std::string>());
    p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    p.metric_name = j.at("metric").get<std::string>();
    p.metric_value = j.at("value").get<double>();
    p.val_metric = j.value("val_metric", 0.0);
    p.params = j.at("params").get<std::uint64_t>();
    p.macs = j.at("macs").get<std::uint64_t>();
    p.arch.params_weights_only = p.params;
    p.arch.params_with_bias = j.value("params_with_bias", std::uint64_t{0});
    p.arch.macs = p.macs;
    p.checkpoint_path = j.value("checkpoint", std::string());
    p.flags = j.value("flags", std::vector<std::string>{});
    p.error = j.value("error", std::string());
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed point record: ") + e.what());
  }
}

}  // namespace pit

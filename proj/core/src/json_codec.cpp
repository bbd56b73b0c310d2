#include "json_codec.hpp"

#include <string>

namespace gfm::detail {

json to_json(const nn::NetSpec& spec) {
    return json{{"input_dim", spec.input_dim},
                {"hidden_sizes", spec.hidden_sizes},
                {"output_dim", spec.output_dim},
                {"activation", std::string(nn::to_string(spec.activation))}};
}

nn::NetSpec net_spec_from_json(const json& j) {
    nn::NetSpec spec;
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
    spec.output_dim = j.at("output_dim").get<std::size_t>();
    spec.activation = nn::parse_activation(j.at("activation").get<std::string>());
    spec.validate();
    return spec;
}

json to_json(const optim::OptimizerConfig& c) {
    return json{{"kind", std::string(optim::to_string(c.kind))},
                {"lr", c.lr},
                {"momentum", c.momentum},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"rms_alpha", c.rms_alpha},
                {"weight_decay", c.weight_decay},
                {"eps", c.eps}};
}

optim::OptimizerConfig optimizer_from_json(const json& j) {
    optim::OptimizerConfig c;
    c.kind = optim::parse_optimizer(j.at("kind").get<std::string>());
    c.lr = j.at("lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.rms_alpha = j.at("rms_alpha").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.eps = j.at("eps").get<double>();
    c.validate();
    return c;
}

json to_json(const traj::DatasetMeta& meta) {
    json archs = json::array();
    for (const auto& g : meta.architectures) archs.push_back({{"spec", to_json(g.spec)}, {"count", g.count}});
    return json{{"family", std::string(traj::to_string(meta.family))},
                {"optimizer", to_json(meta.optimizer)},
                {"init", std::string(nn::to_string(meta.init))},
                {"seed", meta.seed},
                {"architectures", archs},
                {"steps", meta.steps},
                {"batch_size", meta.batch_size},
                {"noise_sigma", meta.noise_sigma},
                {"initial_loss", meta.initial_loss},
                {"final_loss", meta.final_loss}};
}

traj::DatasetMeta dataset_meta_from_json(const json& j) {
    traj::DatasetMeta meta;
    meta.family = traj::parse_family(j.at("family").get<std::string>());
    meta.optimizer = optimizer_from_json(j.at("optimizer"));
    meta.init = nn::parse_init_scheme(j.at("init").get<std::string>());
    meta.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& g : j.at("architectures")) {
        meta.architectures.push_back({net_spec_from_json(g.at("spec")), g.at("count").get<std::size_t>()});
    }
    meta.steps = j.at("steps").get<std::size_t>();
    meta.batch_size = j.at("batch_size").get<std::size_t>();
    meta.noise_sigma = j.at("noise_sigma").get<double>();
    meta.initial_loss = j.at("initial_loss").get<std::vector<double>>();
    meta.final_loss = j.at("final_loss").get<std::vector<double>>();
    return meta;
}

json to_json(const flow::GfmConfig& c) {
    return json{{"beta", c.beta},
                {"gamma", c.gamma},
                {"zeta", c.zeta},
                {"n", c.n},
                {"m", c.m},
                {"sigma", c.sigma},
                {"train_lr", c.train_lr},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"seed", c.seed},
                {"per_sample_t", c.per_sample_t},
                {"bridge_from_last_observed", c.bridge_from_last_observed},
                {"prefix_decay", c.prefix_decay},
                {"prefix_window", c.prefix_window},
                {"init", std::string(nn::to_string(c.init))},
                {"hidden", c.hidden},
                {"input_normalization", "none"}};
}

flow::GfmConfig gfm_config_from_json(const json& j) {
    flow::GfmConfig c;
    c.beta = j.at("beta").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.zeta = j.at("zeta").get<double>();
    c.n = j.at("n").get<std::size_t>();
    c.m = j.at("m").get<std::size_t>();
    c.sigma = j.at("sigma").get<double>();
    c.train_lr = j.at("train_lr").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.per_sample_t = j.at("per_sample_t").get<bool>();
    c.bridge_from_last_observed = j.at("bridge_from_last_observed").get<bool>();
    c.prefix_decay = j.at("prefix_decay").get<double>();
    c.prefix_window = j.at("prefix_window").get<std::size_t>();
    c.init = nn::parse_init_scheme(j.at("init").get<std::string>());
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.validate();
    return c;
}

json to_json(const flow::ForecastOptions& o) {
    return json{{"method", std::string(flow::to_string(o.method))},
                {"h", o.h},
                {"tau", o.tau},
                {"max_steps", o.max_steps},
                {"default_substeps", o.default_substeps}};
}

flow::ForecastOptions forecast_options_from_json(const json& j) {
    flow::ForecastOptions o;
    o.method = flow::parse_integrator(j.at("method").get<std::string>());
    o.h = j.at("h").get<double>();
    o.tau = j.at("tau").get<double>();
    o.max_steps = j.at("max_steps").get<std::size_t>();
    o.default_substeps = j.at("default_substeps").get<std::size_t>();
    return o;
}

}  // namespace gfm::detail

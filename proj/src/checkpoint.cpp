#include <cstring>
#include <fstream>

#include "mcted/model.hpp"
#include "mcted/util.hpp"

namespace mcted {

namespace {

constexpr char kMagic[8] = {'M', 'C', 'T', 'E', 'D', 'C', 'K', '1'};

void write_u64(std::ostream& out, uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

void write_string_list(std::ostream& out, const std::vector<std::string>& list) {
    write_u64(out, list.size());
    for (const std::string& s : list) write_string(out, s);
}

std::vector<std::string> read_string_list(std::istream& in) {
    const uint64_t n = read_u64(in);
    std::vector<std::string> list;
    list.reserve(n);
    for (uint64_t i = 0; i < n; ++i) list.push_back(read_string(in));
    return list;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    write_string(out, name);
    write_u64(out, static_cast<uint64_t>(t.rank()));
    for (const int d : t.shape()) write_u64(out, static_cast<uint64_t>(d));
    for (size_t i = 0; i < t.size(); ++i) {
        uint64_t bits = 0;
        const double v = t[i];
        std::memcpy(&bits, &v, 8);
        write_u64(out, bits);
    }
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    write_string(out, serialize_config(model.hp));
    write_string_list(out, model.vocab.tokens());
    write_string_list(out, model.inventories.word_types());
    write_string_list(out, model.inventories.base_relations());
    write_string_list(out, model.labels);

    // parameter_refs wants a mutable reference; values are only read here.
    ModelParameters& params = const_cast<ModelParameters&>(model.params);
    const std::vector<ParamRef> refs = parameter_refs(params, model.params.fusion.learnable);
    write_u64(out, refs.size());
    for (const ParamRef& ref : refs) write_tensor(out, ref.name, *ref.value);
    if (!out) throw io_error("failed while writing checkpoint: " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint for reading: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw io_error("not a model checkpoint (bad magic): " + path);
    }
    const Hyperparameters hp = parse_config(read_string(in));
    const Vocabulary vocab = Vocabulary::from_tokens(read_string_list(in));
    std::vector<std::string> word_types = read_string_list(in);
    std::vector<std::string> base_relations = read_string_list(in);
    const TypeInventories inventories =
        TypeInventories::from_lists(std::move(word_types), std::move(base_relations));
    std::vector<std::string> labels = read_string_list(in);

    Model model = init_model(hp, vocab, inventories, std::move(labels));
    std::vector<ParamRef> refs = parameter_refs(model.params, hp.lambdas_learnable);

    const uint64_t tensor_count = read_u64(in);
    if (tensor_count != refs.size()) {
        throw io_error("checkpoint tensor count " + std::to_string(tensor_count) +
                       " does not match model structure (" + std::to_string(refs.size()) + ")");
    }
    for (uint64_t t = 0; t < tensor_count; ++t) {
        const std::string name = read_string(in);
        if (name != refs[t].name) {
            throw io_error("checkpoint tensor order mismatch: expected " + refs[t].name +
                           ", found " + name);
        }
        const uint64_t rank = read_u64(in);
        std::vector<int> shape;
        for (uint64_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(read_u64(in)));
        Tensor& target = *refs[t].value;
        if (shape != target.shape()) {
            throw io_error("checkpoint tensor " + name + " has shape mismatch");
        }
        for (size_t i = 0; i < target.size(); ++i) {
            const uint64_t bits = read_u64(in);
            double v = 0.0;
            std::memcpy(&v, &bits, 8);
            target[i] = v;
        }
    }
    if (!in) throw io_error("truncated checkpoint: " + path);
    return model;
}

}  // namespace mcted

#include "fire/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace fire {

namespace fs = std::filesystem;

namespace {

std::string tensor_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "t%04d.bin", index);
    return buf;
}

void write_blob(const fs::path& path, const Matrix& m) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path.string());
    std::vector<double> row_major(static_cast<size_t>(m.size()));
    size_t k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) row_major[k++] = m(i, j);
    f.write(reinterpret_cast<const char*>(row_major.data()),
            static_cast<std::streamsize>(row_major.size() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Matrix read_blob(const fs::path& path, Eigen::Index rows, Eigen::Index cols, size_t bytes) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path.string());
    const size_t expected = static_cast<size_t>(rows) * static_cast<size_t>(cols) * sizeof(double);
    if (bytes != expected)
        throw std::runtime_error("checkpoint: declared byte length mismatch in " + path.string());
    std::vector<double> row_major(static_cast<size_t>(rows) * cols);
    f.read(reinterpret_cast<char*>(row_major.data()), static_cast<std::streamsize>(bytes));
    if (f.gcount() != static_cast<std::streamsize>(bytes))
        throw std::runtime_error("checkpoint: truncated blob " + path.string());
    Matrix m(rows, cols);
    size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = row_major[k++];
    return m;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
    fs::create_directories(dir);
    std::ostringstream manifest;
    manifest << "fire_checkpoint 1\n";
    manifest << "seed " << ckpt.seed << "\n";
    manifest << "step " << ckpt.step << "\n";
    manifest << "chunk " << ckpt.chunk << "\n";
    manifest << "final_activation " << (ckpt.params.arch.final_activation ? 1 : 0) << "\n";
    manifest << "use_bias " << (ckpt.params.arch.use_bias ? 1 : 0) << "\n";
    manifest << "layers " << ckpt.params.layers.size() << "\n";
    for (size_t l = 0; l < ckpt.params.arch.layers.size(); ++l) {
        const auto& s = ckpt.params.arch.layers[l];
        if (s.kind == LayerKind::dense)
            manifest << "layer " << l << " dense " << s.out_dim << " " << s.in_dim << "\n";
        else
            manifest << "layer " << l << " conv " << s.out_channels << " " << s.in_channels << " "
                     << s.kernel_h << " " << s.kernel_w << " " << s.in_h << " " << s.in_w << "\n";
    }

    int t = 0;
    auto emit = [&](size_t layer, const std::string& role, const Matrix& m) {
        const std::string file = tensor_filename(t);
        const size_t bytes = static_cast<size_t>(m.size()) * sizeof(double);
        manifest << "tensor " << t << " layer " << layer << " role " << role << " rows " << m.rows()
                 << " cols " << m.cols() << " file " << file << " bytes " << bytes << "\n";
        write_blob(fs::path(dir) / file, m);
        ++t;
    };
    for (size_t l = 0; l < ckpt.params.layers.size(); ++l) {
        const auto& lw = ckpt.params.layers[l];
        if (lw.kind == LayerKind::dense) {
            emit(l, "weight", lw.dense);
        } else {
            for (size_t s = 0; s < lw.conv.size(); ++s)
                emit(l, "slice" + std::to_string(s), lw.conv[s]);
        }
        if (lw.bias) emit(l, "bias", Matrix(*lw.bias));
    }

    std::ofstream mf(fs::path(dir) / "manifest.txt", std::ios::trunc);
    if (!mf) throw std::runtime_error("checkpoint: cannot write manifest in " + dir);
    mf << manifest.str();
    if (!mf) throw std::runtime_error("checkpoint: manifest write failed in " + dir);
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw std::runtime_error("checkpoint: no manifest in " + dir);

    Checkpoint ckpt;
    std::string line;
    size_t layer_count = 0;
    bool got_magic = false;
    std::vector<std::string> tensor_lines;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "fire_checkpoint") {
            int version = 0;
            ls >> version;
            if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
            got_magic = true;
        } else if (key == "seed") ls >> ckpt.seed;
        else if (key == "step") ls >> ckpt.step;
        else if (key == "chunk") ls >> ckpt.chunk;
        else if (key == "final_activation") { int v; ls >> v; ckpt.params.arch.final_activation = v != 0; }
        else if (key == "use_bias") { int v; ls >> v; ckpt.params.arch.use_bias = v != 0; }
        else if (key == "layers") ls >> layer_count;
        else if (key == "layer") {
            size_t idx; std::string kind;
            ls >> idx >> kind;
            LayerSpec spec;
            if (kind == "dense") {
                int out, in;
                ls >> out >> in;
                spec = LayerSpec::make_dense(in, out);
            } else if (kind == "conv") {
                int oc, ic, kh, kw, ih, iw;
                ls >> oc >> ic >> kh >> kw >> ih >> iw;
                spec = LayerSpec::make_conv(ic, oc, kh, kw, ih, iw);
            } else {
                throw std::runtime_error("checkpoint: unknown layer kind '" + kind + "'");
            }
            if (idx != ckpt.params.arch.layers.size())
                throw std::runtime_error("checkpoint: out-of-order layer entries");
            ckpt.params.arch.layers.push_back(spec);
        } else if (key == "tensor") {
            tensor_lines.push_back(line);
        } else {
            throw std::runtime_error("checkpoint: unknown manifest key '" + key + "'");
        }
    }
    if (!got_magic) throw std::runtime_error("checkpoint: missing magic line");
    if (ckpt.params.arch.layers.size() != layer_count)
        throw std::runtime_error("checkpoint: layer count mismatch");

    // shape the parameter holders, then fill from blobs
    for (const auto& spec : ckpt.params.arch.layers) {
        LayerWeights lw;
        lw.kind = spec.kind;
        if (spec.kind == LayerKind::dense) {
            lw.dense.resize(spec.out_dim, spec.in_dim);
        } else {
            lw.kernel_h = spec.kernel_h;
            lw.kernel_w = spec.kernel_w;
            lw.conv.assign(static_cast<size_t>(spec.kernel_h) * spec.kernel_w,
                           Matrix(spec.out_channels, spec.in_channels));
        }
        if (ckpt.params.arch.use_bias)
            lw.bias = Vector::Zero(spec.kind == LayerKind::dense ? spec.out_dim : spec.out_channels);
        ckpt.params.layers.push_back(std::move(lw));
    }

    for (const auto& tl : tensor_lines) {
        std::istringstream ls(tl);
        std::string kw, k_layer, k_role, k_rows, k_cols, k_file, k_bytes, role, file;
        int idx;
        size_t layer, bytes;
        Eigen::Index rows, cols;
        ls >> kw >> idx >> k_layer >> layer >> k_role >> role >> k_rows >> rows >> k_cols >> cols >>
            k_file >> file >> k_bytes >> bytes;
        if (!ls || k_layer != "layer" || k_role != "role" || k_rows != "rows" || k_cols != "cols" ||
            k_file != "file" || k_bytes != "bytes")
            throw std::runtime_error("checkpoint: malformed tensor line: " + tl);
        if (layer >= ckpt.params.layers.size())
            throw std::runtime_error("checkpoint: tensor references unknown layer");
        Matrix m = read_blob(fs::path(dir) / file, rows, cols, bytes);
        auto& lw = ckpt.params.layers[layer];
        if (role == "weight") {
            if (lw.kind != LayerKind::dense || m.rows() != lw.dense.rows() || m.cols() != lw.dense.cols())
                throw std::runtime_error("checkpoint: weight shape mismatch at layer " + std::to_string(layer));
            lw.dense = m;
        } else if (role.rfind("slice", 0) == 0) {
            const size_t s = std::stoul(role.substr(5));
            if (lw.kind != LayerKind::conv || s >= lw.conv.size())
                throw std::runtime_error("checkpoint: bad conv slice at layer " + std::to_string(layer));
            lw.conv[s] = m;
        } else if (role == "bias") {
            if (!lw.bias || m.cols() != 1 || m.rows() != lw.bias->size())
                throw std::runtime_error("checkpoint: bias shape mismatch at layer " + std::to_string(layer));
            *lw.bias = m.col(0);
        } else {
            throw std::runtime_error("checkpoint: unknown tensor role '" + role + "'");
        }
    }
    return ckpt;
}

}  // namespace fire

#include "cocopipe/imageio.hpp"

#include <csetjmp>
#include <cstdio>
#include <filesystem>

#include <jpeglib.h>
#include <png.h>

#include "cocopipe/post_detect.hpp"

namespace cocopipe {

namespace {

struct FileCloser {
    FILE* fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

FILE* open_or_throw(const std::string& path, const char* mode) {
    FILE* fp = std::fopen(path.c_str(), mode);
    if (!fp) {
        throw Error(ErrorKind::Io, "cannot open " + path);
    }
    return fp;
}

struct JpegErrorHook {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit_hook(j_common_ptr cinfo) {
    auto* hook = reinterpret_cast<JpegErrorHook*>(cinfo->err);
    std::longjmp(hook->jump, 1);
}

ImageRaster read_png_raster(FILE* fp, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "failed to decode PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageRaster image;
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.channels = png_get_channels(png, info);
    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);

    std::vector<png_bytep> rows(image.height);
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) {
        rows[y] = image.pixels.data() + y * stride;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

ImageRaster read_jpeg_raster(FILE* fp, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorHook hook;
    cinfo.err = jpeg_std_error(&hook.pub);
    hook.pub.error_exit = jpeg_error_exit_hook;
    if (setjmp(hook.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorKind::Io, "failed to decode JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space =
        cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    ImageRaster image;
    image.width = static_cast<int>(cinfo.output_width);
    image.height = static_cast<int>(cinfo.output_height);
    image.channels = cinfo.output_components;
    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);

    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = image.pixels.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return image;
}

void write_png_raster(const std::string& path, const ImageRaster& image) {
    FileCloser file{open_or_throw(path, "wb")};
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "failed to encode PNG: " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, image.width, image.height, 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_jpeg_raster(const std::string& path, const ImageRaster& image) {
    FileCloser file{open_or_throw(path, "wb")};
    jpeg_compress_struct cinfo;
    JpegErrorHook hook;
    cinfo.err = jpeg_std_error(&hook.pub);
    hook.pub.error_exit = jpeg_error_exit_hook;
    if (setjmp(hook.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw Error(ErrorKind::Io, "failed to encode JPEG: " + path);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file.fp);
    cinfo.image_width = static_cast<JDIMENSION>(image.width);
    cinfo.image_height = static_cast<JDIMENSION>(image.height);
    cinfo.input_components = image.channels;
    cinfo.in_color_space = image.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 95, TRUE);
    jpeg_start_compress(&cinfo, TRUE);

    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row =
            const_cast<JSAMPROW>(image.pixels.data() + cinfo.next_scanline * stride);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

}  // namespace

ImageRaster read_image(const std::string& path) {
    FileCloser file{open_or_throw(path, "rb")};
    unsigned char magic[8] = {};
    const std::size_t got = std::fread(magic, 1, sizeof magic, file.fp);
    std::rewind(file.fp);
    if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) {
        return read_png_raster(file.fp, path);
    }
    if (got >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) {
        return read_jpeg_raster(file.fp, path);
    }
    throw Error(ErrorKind::Unsupported,
                "unrecognized image format (expected PNG or JPEG): " + path);
}

void write_image(const std::string& path, const ImageRaster& image) {
    if (image.width <= 0 || image.height <= 0 ||
        (image.channels != 1 && image.channels != 3) ||
        image.pixels.size() !=
            static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw Error(ErrorKind::Input, "write_image: inconsistent raster");
    }
    std::string ext = std::filesystem::path(path).extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") {
        write_png_raster(path, image);
    } else if (ext == ".jpg" || ext == ".jpeg") {
        write_jpeg_raster(path, image);
    } else {
        throw Error(ErrorKind::Unsupported, "unsupported image extension: " + path);
    }
}

DepthMap read_depth_png(const std::string& path) {
    FileCloser file{open_or_throw(path, "rb")};
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "failed to decode PNG: " + path);
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);

    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(png, info) != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "depth map must be a 16-bit grayscale PNG: " + path);
    }

    DepthMap depth(static_cast<int>(png_get_image_width(png, info)),
                   static_cast<int>(png_get_image_height(png, info)));
    // assemble samples from PNG's big-endian byte order, host-independent
    std::vector<std::uint8_t> row(static_cast<std::size_t>(depth.width) * 2);
    for (int y = 0; y < depth.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < depth.width; ++x) {
            depth.values[static_cast<std::size_t>(y) * depth.width + x] =
                static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return depth;
}

void write_depth_png(const std::string& path, const DepthMap& depth) {
    if (depth.width <= 0 || depth.height <= 0 ||
        depth.values.size() != static_cast<std::size_t>(depth.width) * depth.height) {
        throw Error(ErrorKind::Input, "write_depth_png: inconsistent depth map");
    }
    FileCloser file{open_or_throw(path, "wb")};
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorKind::Io, "libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "failed to encode PNG: " + path);
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(depth.width) * 2);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const std::uint16_t v = depth.values[static_cast<std::size_t>(y) * depth.width + x];
            row[2 * x] = static_cast<std::uint8_t>(v >> 8);
            row[2 * x + 1] = static_cast<std::uint8_t>(v & 0xFF);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace cocopipe

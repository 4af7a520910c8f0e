//! Adapter that drives an external command-line coder through temp files.
//!
//! Config is a text file of `key: value` lines (`#` starts a comment):
//!
//! ```text
//! codec_id: j2k
//! encode_cmd: opj_compress -i {input} -o {output} -r {param}
//! decode_cmd: opj_decompress -i {input} -o {output}
//! param_kind: bits_per_pixel
//! param_min: 0.05
//! param_max: 8
//! quality_direction: metric_increases_with_param
//! encoded_ext: j2k
//! ```
//!
//! Commands are split on whitespace and run without a shell. The encoder
//! reads a PGM at `{input}` and writes its bitstream to `{output}`; the
//! decoder reads that bitstream and writes a PGM. The bitstream becomes the
//! blob payload verbatim.

use super::{check_blob_codec, check_kind, Codec, CodecDescriptor, CodecError};
use super::{ControlParameter, ParamKind, ParameterRange, QualityDirection};
use crate::imagecore::{load_pgm, store_pgm, BackendId, CompressedBlob, RasterImage};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

/// Directory for the adapter's per-call temp files; system default if unset.
pub const TMPDIR_ENV: &str = "QPRESS_TMPDIR";

const DIAGNOSTIC_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalConfig {
    pub codec_id: String,
    pub encode_cmd: Vec<String>,
    pub decode_cmd: Vec<String>,
    pub param_kind: ParamKind,
    pub range: ParameterRange,
    pub quality_direction: QualityDirection,
    pub encoded_ext: String,
    pub decoded_ext: String,
}

impl FromStr for ExternalConfig {
    type Err = CodecError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |msg: String| CodecError::InvalidConfig(msg);
        let mut map = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| bad(format!("line {}: expected `key: value`", n + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(bad(format!("duplicate key `{}`", k.trim())));
            }
        }
        let mut take = |k: &str| map.remove(k).ok_or_else(|| bad(format!("missing key `{k}`")));
        let codec_id = take("codec_id")?;
        let encode_cmd = split_command(&take("encode_cmd")?);
        let decode_cmd = split_command(&take("decode_cmd")?);
        let param_kind: ParamKind = take("param_kind")?.parse()?;
        let number = |k: &str, v: String| v.parse::<f64>().map_err(|_| bad(format!("`{k}` is not a number")));
        let min = number("param_min", take("param_min")?)?;
        let max = number("param_max", take("param_max")?)?;
        let quality_direction: QualityDirection = take("quality_direction")?.parse()?;
        let encoded_ext = take("encoded_ext").unwrap_or_else(|_| "bin".into());
        let decoded_ext = take("decoded_ext").unwrap_or_else(|_| "pgm".into());
        if let Some(k) = map.keys().next() {
            return Err(bad(format!("unknown key `{k}`")));
        }

        if codec_id.is_empty() || codec_id.len() > usize::from(u16::MAX) {
            return Err(bad("codec_id must be non-empty".into()));
        }
        for (name, cmd) in [("encode_cmd", &encode_cmd), ("decode_cmd", &decode_cmd)] {
            if cmd.is_empty() {
                return Err(bad(format!("`{name}` is empty")));
            }
            for ph in ["{input}", "{output}"] {
                if !cmd.iter().any(|t| t.contains(ph)) {
                    return Err(bad(format!("`{name}` lacks the {ph} placeholder")));
                }
            }
        }
        if !encode_cmd.iter().any(|t| t.contains("{param}")) {
            return Err(bad("`encode_cmd` lacks the {param} placeholder".into()));
        }
        if quality_direction != param_kind.natural_direction() {
            return Err(bad(format!(
                "{param_kind} coders must declare {:?}",
                param_kind.natural_direction()
            )));
        }
        let range = ParameterRange::new(param_kind, min, max)?;
        Ok(ExternalConfig {
            codec_id,
            encode_cmd,
            decode_cmd,
            param_kind,
            range,
            quality_direction,
            encoded_ext,
            decoded_ext,
        })
    }
}

fn split_command(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Resolves a program name the way `Command` will: paths are checked as-is,
/// bare names against `PATH`.
fn locate(program: &str) -> Option<PathBuf> {
    let is_exec = |p: &Path| p.is_file();
    if program.contains(std::path::MAIN_SEPARATOR) || program.contains('/') {
        let p = PathBuf::from(program);
        return is_exec(&p).then_some(p);
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|dir| dir.join(program))
            .find(|p| is_exec(p))
    })
}

#[derive(Debug, Clone)]
pub struct ExternalCodec {
    descriptor: CodecDescriptor,
    config: ExternalConfig,
}

impl ExternalCodec {
    /// Fails with [`CodecError::ToolNotFound`] if either program is missing.
    pub fn register(config: ExternalConfig) -> Result<Self, CodecError> {
        for cmd in [&config.encode_cmd, &config.decode_cmd] {
            if locate(&cmd[0]).is_none() {
                return Err(CodecError::ToolNotFound(cmd[0].clone()));
            }
        }
        Ok(ExternalCodec {
            descriptor: CodecDescriptor {
                codec_id: config.codec_id.clone(),
                param_kind: config.param_kind,
                default_range: config.range,
                quality_direction: config.quality_direction,
            },
            config,
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn workdir() -> Result<tempfile::TempDir, CodecError> {
        let mut b = tempfile::Builder::new();
        b.prefix("qpress-ext-");
        Ok(match std::env::var_os(TMPDIR_ENV) {
            Some(dir) => b.tempdir_in(dir)?,
            None => b.tempdir()?,
        })
    }

    fn run(template: &[String], input: &Path, output: &Path, param: f64) -> Result<(), CodecError> {
        let args: Vec<String> = template
            .iter()
            .map(|t| {
                t.replace("{input}", &input.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
                    .replace("{param}", &param.to_string())
            })
            .collect();
        let out = Command::new(&args[0])
            .args(&args[1..])
            .output()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CodecError::ToolNotFound(args[0].clone()),
                _ => CodecError::Io(e),
            })?;
        if !out.status.success() {
            let mut diagnostic = String::from_utf8_lossy(&out.stderr).trim().to_string();
            if diagnostic.is_empty() {
                diagnostic = String::from_utf8_lossy(&out.stdout).trim().to_string();
            }
            if diagnostic.len() > DIAGNOSTIC_LIMIT {
                let mut cut = DIAGNOSTIC_LIMIT;
                while !diagnostic.is_char_boundary(cut) {
                    cut -= 1;
                }
                diagnostic.truncate(cut);
            }
            return Err(CodecError::ToolFailed {
                command: args.join(" "),
                status: out.status.to_string(),
                diagnostic,
            });
        }
        if !output.is_file() {
            return Err(CodecError::OutputMissing(output.display().to_string()));
        }
        Ok(())
    }
}

impl Codec for ExternalCodec {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.descriptor
    }

    fn compress(&self, image: &RasterImage, param: ControlParameter) -> Result<CompressedBlob, CodecError> {
        check_kind(self, param)?;
        let dir = Self::workdir()?;
        let input = dir.path().join("input.pgm");
        let output = dir.path().join(format!("encoded.{}", self.config.encoded_ext));
        std::fs::write(&input, store_pgm(image))?;
        Self::run(&self.config.encode_cmd, &input, &output, param.value())?;
        let payload = std::fs::read(&output)?;
        Ok(CompressedBlob {
            codec_id: self.descriptor.codec_id.clone(),
            param,
            width: image.width(),
            height: image.height(),
            bit_depth: image.bit_depth(),
            backend: BackendId::Opaque,
            payload,
        })
    }

    fn decompress(&self, blob: &CompressedBlob) -> Result<RasterImage, CodecError> {
        check_blob_codec(self, blob)?;
        let dir = Self::workdir()?;
        let input = dir.path().join(format!("encoded.{}", self.config.encoded_ext));
        let output = dir.path().join(format!("decoded.{}", self.config.decoded_ext));
        std::fs::write(&input, &blob.payload)?;
        Self::run(&self.config.decode_cmd, &input, &output, blob.param.value())?;
        let image = load_pgm(&std::fs::read(&output)?)?;
        if (image.width(), image.height(), image.bit_depth()) != (blob.width, blob.height, blob.bit_depth) {
            return Err(CodecError::CorruptPayload(format!(
                "decoder produced {} but the blob records {}x{}x{}",
                image.shape_string(),
                blob.width,
                blob.height,
                blob.bit_depth.bits()
            )));
        }
        Ok(image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::BitDepth;

    fn config(encode: &str, decode: &str) -> String {
        format!(
            "# test coder\ncodec_id: copy\nencode_cmd: {encode}\ndecode_cmd: {decode}\n\
             param_kind: quantization_step\nparam_min: 1\nparam_max: 64\n\
             quality_direction: metric_decreases_with_param\n"
        )
    }

    #[test]
    fn parses_and_validates() {
        let c: ExternalConfig = config("cp {input} {output} {param}", "cp {input} {output}").parse().unwrap();
        assert_eq!(c.codec_id, "copy");
        assert_eq!(c.encode_cmd, ["cp", "{input}", "{output}", "{param}"]);
        assert_eq!(c.range.max(), 64.0);
        assert!(config("cp {input} {output}", "cp {input} {output}").parse::<ExternalConfig>().is_err());
        let wrong_dir = config("cp {input} {output} {param}", "cp {input} {output}")
            .replace("decreases", "increases");
        assert!(wrong_dir.parse::<ExternalConfig>().is_err());
        let extra = config("cp {input} {output} {param}", "cp {input} {output}") + "colour: red\n";
        assert!(extra.parse::<ExternalConfig>().is_err());
    }

    #[test]
    fn missing_tool_fails_at_registration() {
        let c: ExternalConfig = config("no-such-coder-xyz {input} {output} {param}", "cp {input} {output}")
            .parse()
            .unwrap();
        assert!(matches!(ExternalCodec::register(c), Err(CodecError::ToolNotFound(t)) if t == "no-such-coder-xyz"));
    }

    #[cfg(unix)]
    #[test]
    fn copy_coder_round_trips_and_failures_carry_stderr() {
        // the script is passed as one argument, so build the command by hand
        let mut c: ExternalConfig = config("cp {input} {output} {param}", "cp {input} {output}").parse().unwrap();
        c.encode_cmd = vec![
            "sh".into(),
            "-c".into(),
            "cp \"$0\" \"$1\"".into(),
            "{input}".into(),
            "{output}".into(),
            "{param}".into(),
        ];
        let codec = ExternalCodec::register(c.clone()).unwrap();
        let img = RasterImage::new(3, 2, BitDepth::Eight, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let p = ControlParameter::new(ParamKind::QuantizationStep, 4.0).unwrap();
        let blob = codec.compress(&img, p).unwrap();
        assert_eq!(blob.payload, store_pgm(&img));
        assert_eq!(codec.decompress(&blob).unwrap(), img);

        c.encode_cmd = vec![
            "sh".into(),
            "-c".into(),
            "echo boom >&2; exit 3".into(),
            "{input}".into(),
            "{output}".into(),
            "{param}".into(),
        ];
        let failing = ExternalCodec::register(c.clone()).unwrap();
        match failing.compress(&img, p) {
            Err(CodecError::ToolFailed { diagnostic, .. }) => assert_eq!(diagnostic, "boom"),
            other => panic!("unexpected {other:?}"),
        }

        c.encode_cmd[2] = "true".into();
        let silent = ExternalCodec::register(c).unwrap();
        assert!(matches!(silent.compress(&img, p), Err(CodecError::OutputMissing(_))));
    }
}

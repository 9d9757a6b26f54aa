//! Video work is delegated to an external transcoder and prober whose
//! command lines follow the common ffmpeg/ffprobe conventions.

use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::str::FromStr;

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("media tool `{command}` could not be started: {source}")]
    Missing {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{command}` exited with {status}: {stderr}")]
    Failed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("cannot read probe output for {path}: {message}")]
    Probe { path: PathBuf, message: String },
}

impl MediaError {
    /// Missing tools stop a compilation; everything else only costs the
    /// affected clip.
    pub fn is_fatal(&self) -> bool {
        matches!(self, MediaError::Missing { .. })
    }
}

impl From<MediaError> for crate::Error {
    fn from(e: MediaError) -> Self {
        crate::Error::Media(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Corner {
    TopLeft,
    TopRight,
    #[default]
    BottomLeft,
    BottomRight,
}

impl Corner {
    fn drawtext_position(self) -> &'static str {
        match self {
            Corner::TopLeft => "x=24:y=24",
            Corner::TopRight => "x=w-tw-24:y=24",
            Corner::BottomLeft => "x=24:y=h-th-24",
            Corner::BottomRight => "x=w-tw-24:y=h-th-24",
        }
    }
}

impl FromStr for Corner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "top-left" => Ok(Corner::TopLeft),
            "top-right" => Ok(Corner::TopRight),
            "bottom-left" => Ok(Corner::BottomLeft),
            "bottom-right" => Ok(Corner::BottomRight),
            other => Err(format!("unknown corner `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub width: u32,
    pub height: u32,
    pub has_audio: bool,
    pub duration: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Transcoder {
    /// Program plus leading arguments, e.g. `["ffmpeg"]`.
    pub transcode: Vec<String>,
    pub probe: Vec<String>,
    pub corner: Corner,
    pub font_size: u32,
    pub fps: u32,
}

impl Default for Transcoder {
    fn default() -> Self {
        Transcoder {
            transcode: vec!["ffmpeg".into()],
            probe: vec!["ffprobe".into()],
            corner: Corner::default(),
            font_size: 28,
            fps: 30,
        }
    }
}

/// Splits a configured command template on whitespace.
pub fn split_command(template: &str) -> Vec<String> {
    template.split_whitespace().map(str::to_string).collect()
}

fn run(template: &[String], args: &[String]) -> Result<Output, MediaError> {
    let command = template.join(" ");
    let (program, leading) = template.split_first().ok_or_else(|| MediaError::Missing {
        command: command.clone(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
    })?;
    let output = Command::new(program)
        .args(leading)
        .args(args)
        .stdin(Stdio::null())
        .output()
        .map_err(|source| MediaError::Missing {
            command: command.clone(),
            source,
        })?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(MediaError::Failed {
            command,
            status: output.status.to_string(),
            stderr: stderr.lines().last().unwrap_or("").to_string(),
        });
    }
    Ok(output)
}

fn os(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Escapes text for a drawtext `text='...'` option inside a filter graph.
pub fn drawtext_escape(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        match c {
            '\\' | '\'' | ':' | '%' | ',' | ';' | '[' | ']' => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}

#[derive(Deserialize)]
struct ProbeJson {
    #[serde(default)]
    streams: Vec<ProbeStream>,
    format: Option<ProbeFormat>,
}

#[derive(Deserialize)]
struct ProbeStream {
    codec_type: Option<String>,
    width: Option<u32>,
    height: Option<u32>,
}

#[derive(Deserialize)]
struct ProbeFormat {
    duration: Option<String>,
}

impl Transcoder {
    /// Fails if either tool cannot be started.
    pub fn check(&self) -> Result<(), MediaError> {
        for template in [&self.transcode, &self.probe] {
            if let Err(e @ MediaError::Missing { .. }) = run(template, &["-version".into()]) {
                return Err(e);
            }
        }
        Ok(())
    }

    pub fn probe(&self, path: &Path) -> Result<Probe, MediaError> {
        let args = ["-v", "error", "-print_format", "json", "-show_streams", "-show_format"]
            .iter()
            .map(|s| s.to_string())
            .chain([os(path)])
            .collect::<Vec<_>>();
        let output = run(&self.probe, &args)?;
        let bad = |message: String| MediaError::Probe {
            path: path.to_path_buf(),
            message,
        };
        let parsed: ProbeJson = serde_json::from_slice(&output.stdout).map_err(|e| bad(e.to_string()))?;
        let video = parsed
            .streams
            .iter()
            .find(|s| s.codec_type.as_deref() == Some("video"))
            .ok_or_else(|| bad("no video stream".into()))?;
        Ok(Probe {
            width: video.width.ok_or_else(|| bad("video stream without width".into()))?,
            height: video.height.ok_or_else(|| bad("video stream without height".into()))?,
            has_audio: parsed.streams.iter().any(|s| s.codec_type.as_deref() == Some("audio")),
            duration: parsed.format.and_then(|f| f.duration).and_then(|d| d.parse().ok()),
        })
    }

    pub fn annotate_args(&self, input: &Path, output: &Path, label: &str) -> Vec<String> {
        let filter = format!(
            "drawtext=text='{}':{}:fontsize={}:fontcolor=white:box=1:boxcolor=black@0.6:boxborderw=8",
            drawtext_escape(label),
            self.corner.drawtext_position(),
            self.font_size
        );
        [
            "-y", "-v", "error", "-i", &os(input), "-vf", &filter, "-c:v", "libx264", "-pix_fmt", "yuv420p", "-c:a",
            "aac", "-movflags", "+faststart", &os(output),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    /// Re-encodes `input` to MP4 with `label` burned into the configured
    /// corner.
    pub fn annotate(&self, input: &Path, output: &Path, label: &str) -> Result<(), MediaError> {
        run(&self.transcode, &self.annotate_args(input, output, label)).map(drop)
    }

    pub fn concat_args(&self, inputs: &[PathBuf], probes: &[Probe], output: &Path) -> Vec<String> {
        let (w, h) = (probes[0].width, probes[0].height);
        let audio = probes.iter().all(|p| p.has_audio);
        let mut args: Vec<String> = vec!["-y".into(), "-v".into(), "error".into()];
        for input in inputs {
            args.push("-i".into());
            args.push(os(input));
        }
        let mut graph = String::new();
        let mut joined = String::new();
        for i in 0..inputs.len() {
            graph.push_str(&format!(
                "[{i}:v]scale={w}:{h}:force_original_aspect_ratio=decrease,pad={w}:{h}:(ow-iw)/2:(oh-ih)/2,setsar=1,fps={}[v{i}];",
                self.fps
            ));
            joined.push_str(&format!("[v{i}]"));
            if audio {
                joined.push_str(&format!("[{i}:a]"));
            }
        }
        let a = u8::from(audio);
        graph.push_str(&format!("{joined}concat=n={}:v=1:a={a}[v]", inputs.len()));
        if audio {
            graph.push_str("[a]");
        }
        args.extend(["-filter_complex".into(), graph, "-map".into(), "[v]".into()]);
        if audio {
            args.extend(["-map".into(), "[a]".into(), "-c:a".into(), "aac".into()]);
        }
        args.extend(
            ["-c:v", "libx264", "-pix_fmt", "yuv420p", "-movflags", "+faststart"]
                .iter()
                .map(|s| s.to_string()),
        );
        args.push(os(output));
        args
    }

    /// Joins clips in order, scaling and padding each to the first clip's
    /// resolution at a uniform frame rate.
    pub fn concat(&self, inputs: &[PathBuf], output: &Path) -> Result<(), MediaError> {
        let probes = inputs.iter().map(|p| self.probe(p)).collect::<Result<Vec<_>, _>>()?;
        run(&self.transcode, &self.concat_args(inputs, &probes, output)).map(drop)
    }
}

/// MIME type for a URL path, by file extension. Unknown extensions map to
/// `application/octet-stream`.
pub fn mime_for_path(path: &str) -> &'static str {
    let path = path.split(['?', '#']).next().unwrap_or_default();
    let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase()).unwrap_or_default();
    match ext.as_str() {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "application/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "txt" => "text/plain; charset=utf-8",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "svg" => "image/svg+xml",
        "ico" => "image/x-icon",
        "mp4" => "video/mp4",
        "webm" => "video/webm",
        "m3u8" => "application/vnd.apple.mpegurl",
        "mpd" => "application/dash+xml",
        "mp3" => "audio/mpeg",
        "woff2" => "font/woff2",
        _ => "application/octet-stream",
    }
}

#[cfg(test)]
mod tests {
    use super::mime_for_path;

    #[test]
    fn by_extension() {
        assert_eq!(mime_for_path("/a/b.PNG"), "image/png");
        assert_eq!(mime_for_path("/x.js?v=2"), "application/javascript");
        assert_eq!(mime_for_path("/dir/"), "application/octet-stream");
        assert_eq!(mime_for_path("/live.m3u8"), "application/vnd.apple.mpegurl");
    }
}

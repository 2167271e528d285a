if (!window.__adsLoaded) {
  document.write('<script src="/stall/feed.js"><\/script>');
}

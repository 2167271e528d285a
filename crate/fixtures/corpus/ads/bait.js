window.__adsLoaded = true;

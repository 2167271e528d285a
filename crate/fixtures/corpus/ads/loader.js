(function () {
  var slot = document.getElementById('hero-slot');
  var img = document.createElement('img');
  img.src = '/img/hero.png';
  img.alt = 'Harbor at dawn';
  slot.appendChild(img);
  var css = document.createElement('link');
  css.rel = 'stylesheet';
  css.href = '/css/old.css';
  slot.appendChild(css);
  var s = document.createElement('script');
  s.src = '/js/widget.js';
  slot.appendChild(s);
})();
